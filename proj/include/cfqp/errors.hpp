#pragma once

#include <stdexcept>
#include <string>

namespace cfqp {

// Invalid input data: malformed corpus lines, bad UTF-8, broken invariants.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid or inconsistent configuration (wrong dim, missing endpoint, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Remote I/O failure. Retriable unless stated otherwise; carries the last
// HTTP status (0 when the transport itself failed).
class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, int status)
        : std::runtime_error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_ = 0;
};

class TimeoutError : public TransportError {
public:
    explicit TimeoutError(const std::string& what) : TransportError(what, 0) {}
};

// Prompt/backend contract violations (unbound placeholder, unknown task, ...).
class OracleError : public std::runtime_error {
public:
    explicit OracleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cfqp
