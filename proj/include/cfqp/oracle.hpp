#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <semaphore>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfqp/http.hpp"
#include "cfqp/memory.hpp"

namespace cfqp {

struct ChatMessage {
    std::string role;  // "system" or "user"
    std::string content;
};

enum class BackendKind { remote, mock };

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    std::string endpoint;
    std::string model_name = "mock";
    double temperature = 0.0;
    std::chrono::milliseconds timeout{30000};
    int max_retries = 2;
    std::chrono::milliseconds backoff{250};  // doubles per retry
    std::size_t max_in_flight = 4;
    bool determinism_required = false;  // forces temperature 0
};

// Template bodies use {placeholder} syntax ([a-z_]+ names). The text before
// the first "---" line becomes the system message, the rest the user
// message. Every built-in body's first line is "#TASK: <name>" so the mock
// backend can route.
struct PromptTemplate {
    std::string name;  // predict | memory_update | select | judge
    std::string body;
};

class TemplateRegistry {
public:
    // Built-in templates.
    TemplateRegistry();

    // Overrides built-ins from <name>.txt files found in dir.
    void load_dir(const std::filesystem::path& dir);
    // Writes any missing built-in template files into dir.
    void write_builtins(const std::filesystem::path& dir) const;

    const PromptTemplate& get(const std::string& name) const;
    // First 16 hex chars of the body's SHA-256.
    std::string hash(const std::string& name) const;
    std::map<std::string, std::string> hashes() const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

// Deterministic substitution; throws OracleError("unbound placeholder: x")
// when a placeholder has no binding.
std::vector<ChatMessage> render(const PromptTemplate& t,
                                const std::map<std::string, std::string>& bindings);

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
    virtual std::string name() const = 0;
};

// Behavioral mock: routes on the "#TASK:" line and answers from the prompt
// text alone, so every downstream result is reproducible offline.
class MockBackend final : public Backend {
public:
    std::string complete(const std::vector<ChatMessage>& messages) override;
    std::string name() const override { return "mock"; }

    static constexpr std::size_t kDim = 768;  // embedding dim for mock scoring
};

class RemoteBackend final : public Backend {
public:
    RemoteBackend(BackendConfig cfg, http::PostFn transport = {});
    std::string complete(const std::vector<ChatMessage>& messages) override;
    std::string name() const override { return "remote:" + cfg_.model_name; }

private:
    BackendConfig cfg_;
    http::PostFn post_;
    std::counting_semaphore<256> inflight_;  // caps concurrent requests
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, http::PostFn transport = {});

// Prompt-block helpers shared by the mock backend, the local selection
// fallback and tests.
namespace prompt {

// Content of the "[HEADER]" block (lines until the next known header).
std::string block(std::string_view prompt_text, std::string_view header);
// "visa(0.9), fee(0.4)" -> pairs, prompt order.
std::vector<std::pair<std::string, double>> parse_topic_weights(std::string_view memory_block);
// Numbered candidate lines "0) text".
std::vector<std::string> parse_candidates(std::string_view candidates_block);
// "  Q: ..." lines of the neighbors block.
std::vector<std::string> neighbor_questions(std::string_view neighbors_block);
// Profile summaries of the "- id (...) profile: X" lines.
std::vector<std::string> neighbor_profiles(std::string_view neighbors_block);
// Selection context: question + top-3 memory topics + predicted question +
// whatever the neighbors block carries.
std::string selection_context(std::string_view user_prompt);
// Hash-embed cosine argmax of candidates against context; ties -> lowest.
std::size_t cosine_argmax(const std::vector<std::string>& candidates, std::string_view context);

}  // namespace prompt

// Topic extractor that asks the backend via the memory_update template and
// falls back to the deterministic extractor after one retry. Never throws.
TopicExtractor llm_extractor(Backend& backend, const TemplateRegistry& registry,
                             const MemoryParams& params = {});

}  // namespace cfqp
