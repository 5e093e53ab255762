#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace cfqp::http {

struct Request {
    std::string url;   // full origin + path, e.g. http://127.0.0.1:8080/embed
    std::string body;  // JSON payload
    std::vector<std::pair<std::string, std::string>> headers;
    std::chrono::milliseconds timeout{30000};
};

struct Response {
    int status = 0;  // 0 on transport failure
    std::string body;
    std::string error;
    bool timed_out = false;
};

// Injectable transport; the default posts JSON via cpp-httplib.
using PostFn = std::function<Response(const Request&)>;

PostFn default_post();

// Splits a URL into origin ("scheme://host:port") and path ("/x"; "/" when
// absent). Throws ConfigError on unsupported/garbled URLs.
std::pair<std::string, std::string> split_url(const std::string& url);

}  // namespace cfqp::http
