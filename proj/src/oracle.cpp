#include "cfqp/oracle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <semaphore>
#include <thread>

#include "cfqp/embedder.hpp"
#include "cfqp/errors.hpp"
#include "cfqp/social.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kHeaders = {
    "[MEMORY]", "[HISTORY]", "[NEIGHBORS]", "[QUESTION]",
    "[CANDIDATES]", "[PREDICTION]", "[TRUTH]",
};

bool is_header(std::string_view line) {
    for (auto h : kHeaders) {
        if (line == h) return true;
    }
    return false;
}

const char* kPredictBody =
    "#TASK: predict\n"
    "You anticipate the next question a user will ask an assistant. Ground the\n"
    "prediction in every context block provided. Reply with exactly one line\n"
    "containing only the predicted question.\n"
    "---\n"
    "{memory}{history}{neighbors}[QUESTION]\n"
    "{question}\n"
    "\n"
    "Predict the user's next question.\n";

const char* kSelectBody =
    "#TASK: select\n"
    "Pick the candidate most likely to be the user's actual next question.\n"
    "Reply with only its index number.\n"
    "---\n"
    "{memory}{neighbors}[QUESTION]\n"
    "{question}\n"
    "\n"
    "[PREDICTION]\n"
    "{prediction}\n"
    "\n"
    "[CANDIDATES]\n"
    "{candidates}\n"
    "\n"
    "Reply with the index of the most likely next question.\n";

const char* kJudgeBody =
    "#TASK: judge\n"
    "Grade how well the predicted question matches the actual one, considering\n"
    "relevance, fluency and logic. Reply with a single score between 0 and 1.\n"
    "---\n"
    "[PREDICTION]\n"
    "{prediction}\n"
    "\n"
    "[TRUTH]\n"
    "{truth}\n";

const char* kMemoryUpdateBody =
    "#TASK: memory_update\n"
    "Read the user's new question and propose weight updates for their\n"
    "preference memory. Reply with a JSON array of {\"topic\": string,\n"
    "\"delta\": number} objects, deltas in [-1, 1].\n"
    "---\n"
    "{memory}[QUESTION]\n"
    "{question}\n";

std::string task_of(const std::vector<ChatMessage>& messages) {
    for (const auto& m : messages) {
        auto lines = text::split_lines(m.content);
        if (!lines.empty() && lines.front().rfind("#TASK: ", 0) == 0) {
            return text::trim(lines.front().substr(7));
        }
    }
    return {};
}

std::string user_content(const std::vector<ChatMessage>& messages) {
    std::string joined;
    for (const auto& m : messages) {
        if (m.role == "user") {
            if (!joined.empty()) joined += "\n";
            joined += m.content;
        }
    }
    return joined;
}

std::string mock_predict(const std::string& prompt_text) {
    auto topics = prompt::parse_topic_weights(prompt::block(prompt_text, "[MEMORY]"));
    std::stable_sort(topics.begin(), topics.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::vector<std::string> picked;
    for (const auto& [name, w] : topics) {
        if (picked.size() == 2) break;
        if (std::find(picked.begin(), picked.end(), name) == picked.end()) picked.push_back(name);
    }
    if (picked.size() < 2) {
        for (const auto& tok : text::tokenize(prompt::block(prompt_text, "[QUESTION]"))) {
            if (picked.size() == 2) break;
            if (text::is_stopword(tok)) continue;
            if (std::find(picked.begin(), picked.end(), tok) == picked.end()) picked.push_back(tok);
        }
    }
    if (picked.empty()) return "Please tell me more";
    if (picked.size() == 1) return "Please tell me more about " + picked[0];
    return "Please tell me more about " + picked[0] + " and " + picked[1];
}

std::string mock_select(const std::string& prompt_text) {
    auto candidates = prompt::parse_candidates(prompt::block(prompt_text, "[CANDIDATES]"));
    if (candidates.empty()) throw OracleError("select task without candidates");
    std::size_t idx = prompt::cosine_argmax(candidates, prompt::selection_context(prompt_text));
    return std::to_string(idx);
}

std::string mock_judge(const std::string& prompt_text) {
    std::string pred = prompt::block(prompt_text, "[PREDICTION]");
    std::string truth = prompt::block(prompt_text, "[TRUTH]");
    double c = cosine(hash_embed(pred, MockBackend::kDim), hash_embed(truth, MockBackend::kDim));
    double score = std::round((c + 1.0) / 2.0 * 10000.0) / 10000.0;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.4f", score);
    return buf;
}

std::string mock_memory_update(const std::string& prompt_text) {
    json arr = json::array();
    for (const auto& d : extract_topics_deterministic(prompt::block(prompt_text, "[QUESTION]"))) {
        json item;
        item["topic"] = d.topic;
        item["delta"] = d.delta;
        arr.push_back(std::move(item));
    }
    return arr.dump();
}

}  // namespace

TemplateRegistry::TemplateRegistry() {
    templates_["predict"] = {"predict", kPredictBody};
    templates_["select"] = {"select", kSelectBody};
    templates_["judge"] = {"judge", kJudgeBody};
    templates_["memory_update"] = {"memory_update", kMemoryUpdateBody};
}

void TemplateRegistry::load_dir(const std::filesystem::path& dir) {
    for (auto& [name, t] : templates_) {
        auto file = dir / (name + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (body.rfind("#TASK: ", 0) != 0) {
            throw ConfigError("template " + file.string() + " must start with '#TASK: '");
        }
        t.body = std::move(body);
    }
}

void TemplateRegistry::write_builtins(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& [name, t] : templates_) {
        auto file = dir / (name + ".txt");
        if (std::filesystem::exists(file)) continue;
        std::ofstream out(file, std::ios::binary | std::ios::trunc);
        out << t.body;
    }
}

const PromptTemplate& TemplateRegistry::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("unknown template '" + name + "'");
    return it->second;
}

std::string TemplateRegistry::hash(const std::string& name) const {
    return text::sha256_hex(get(name).body).substr(0, 16);
}

std::map<std::string, std::string> TemplateRegistry::hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, t] : templates_) out[name] = hash(name);
    return out;
}

std::vector<ChatMessage> render(const PromptTemplate& t,
                                const std::map<std::string, std::string>& bindings) {
    std::string rendered;
    rendered.reserve(t.body.size());
    for (std::size_t i = 0; i < t.body.size();) {
        char c = t.body[i];
        if (c == '{') {
            std::size_t end = i + 1;
            while (end < t.body.size() &&
                   (std::islower(static_cast<unsigned char>(t.body[end])) || t.body[end] == '_')) {
                ++end;
            }
            if (end < t.body.size() && t.body[end] == '}' && end > i + 1) {
                std::string name = t.body.substr(i + 1, end - i - 1);
                auto it = bindings.find(name);
                if (it == bindings.end()) {
                    throw OracleError("unbound placeholder: " + name);
                }
                rendered += it->second;
                i = end + 1;
                continue;
            }
        }
        rendered.push_back(c);
        ++i;
    }

    // The text before the first "---" line is the system message; a body
    // without the separator becomes the user message in full.
    std::string system_part = "You are a helpful assistant.";
    std::string user_part = rendered;
    auto lines = text::split_lines(rendered);
    for (std::size_t li = 0; li < lines.size(); ++li) {
        if (text::trim(lines[li]) == "---") {
            system_part = text::join({lines.begin(), lines.begin() + li}, "\n");
            user_part = text::join({lines.begin() + li + 1, lines.end()}, "\n");
            break;
        }
    }
    std::vector<ChatMessage> out;
    out.push_back({"system", system_part});
    out.push_back({"user", user_part});
    return out;
}

std::string MockBackend::complete(const std::vector<ChatMessage>& messages) {
    std::string task = task_of(messages);
    if (task.empty()) throw OracleError("mock backend: missing #TASK line");
    std::string prompt_text = user_content(messages);
    if (task == "predict") return mock_predict(prompt_text);
    if (task == "select") return mock_select(prompt_text);
    if (task == "judge") return mock_judge(prompt_text);
    if (task == "memory_update") return mock_memory_update(prompt_text);
    throw OracleError("mock backend: unknown task '" + task + "'");
}

RemoteBackend::RemoteBackend(BackendConfig cfg, http::PostFn transport)
    : cfg_(std::move(cfg)),
      post_(transport ? std::move(transport) : http::default_post()),
      inflight_(static_cast<std::ptrdiff_t>(
          cfg_.max_in_flight ? std::min<std::size_t>(cfg_.max_in_flight, 256) : 4)) {
    if (cfg_.endpoint.empty()) throw ConfigError("remote backend requires an endpoint");
}

std::string RemoteBackend::complete(const std::vector<ChatMessage>& messages) {
    json body;
    body["model"] = cfg_.model_name;
    body["temperature"] = cfg_.temperature;
    body["messages"] = json::array();
    for (const auto& m : messages) {
        body["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    http::Request req;
    req.url = cfg_.endpoint;
    req.body = body.dump();
    req.timeout = cfg_.timeout;
    if (const char* key = std::getenv("CFQP_LLM_API_KEY"); key && *key) {
        req.headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    int last_status = 0;
    std::string last_error;
    bool last_timeout = false;
    const int attempts = 1 + std::max(0, cfg_.max_retries);
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            auto delay = cfg_.backoff * (1 << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        inflight_.acquire();
        http::Response res = post_(req);
        inflight_.release();
        if (res.status >= 200 && res.status < 300) {
            json parsed = json::parse(res.body, nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty() ||
                !parsed["choices"][0].contains("message")) {
                throw TransportError("malformed chat response", res.status);
            }
            return parsed["choices"][0]["message"].value("content", "");
        }
        last_status = res.status;
        last_error = res.error;
        last_timeout = res.timed_out;
        bool retriable = (res.status == 0) || (res.status >= 500);
        if (!retriable) {
            throw TransportError("chat HTTP " + std::to_string(res.status), res.status);
        }
    }
    if (last_timeout) {
        throw TimeoutError("chat request timed out after " + std::to_string(attempts) +
                           " attempts");
    }
    throw TransportError("chat failed after " + std::to_string(attempts) + " attempts" +
                             (last_status ? " (HTTP " + std::to_string(last_status) + ")"
                                          : " (" + last_error + ")"),
                         last_status);
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg, http::PostFn transport) {
    if (cfg.determinism_required && cfg.temperature != 0.0) {
        throw ConfigError("determinism requires temperature 0");
    }
    if (cfg.kind == BackendKind::mock) return std::make_unique<MockBackend>();
    return std::make_unique<RemoteBackend>(cfg, std::move(transport));
}

namespace prompt {

std::string block(std::string_view prompt_text, std::string_view header) {
    auto lines = text::split_lines(prompt_text);
    std::vector<std::string> content;
    bool inside = false;
    for (const auto& line : lines) {
        if (line == header) {
            inside = true;
            continue;
        }
        if (inside && is_header(line)) break;
        if (inside) content.push_back(line);
    }
    while (!content.empty() && text::trim(content.back()).empty()) content.pop_back();
    return text::join(content, "\n");
}

std::vector<std::pair<std::string, double>> parse_topic_weights(std::string_view memory_block) {
    std::vector<std::pair<std::string, double>> out;
    std::size_t i = 0;
    const std::string s(memory_block);
    while (i < s.size()) {
        std::size_t open = s.find('(', i);
        if (open == std::string::npos) break;
        std::size_t close = s.find(')', open);
        if (close == std::string::npos) break;
        // Topic text runs back from '(' to the previous delimiter.
        std::size_t start = open;
        while (start > 0 && s[start - 1] != ',' && s[start - 1] != '\n') --start;
        std::string name = text::trim(s.substr(start, open - start));
        auto w = text::parse_first_real(s.substr(open + 1, close - open - 1));
        if (!name.empty() && w) out.emplace_back(name, *w);
        i = close + 1;
    }
    return out;
}

std::vector<std::string> parse_candidates(std::string_view candidates_block) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(candidates_block)) {
        std::size_t p = line.find(") ");
        if (p == std::string::npos || p == 0) continue;
        auto idx = text::parse_strict_int(line.substr(0, p));
        if (!idx) continue;
        out.push_back(line.substr(p + 2));
    }
    return out;
}

std::vector<std::string> neighbor_questions(std::string_view neighbors_block) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(neighbors_block)) {
        std::string t = line;
        if (t.rfind("  Q: ", 0) == 0) {
            out.push_back(t.substr(5));
        }
    }
    return out;
}

std::vector<std::string> neighbor_profiles(std::string_view neighbors_block) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(neighbors_block)) {
        if (line.rfind("- ", 0) != 0) continue;
        auto p = line.find(" profile: ");
        if (p == std::string::npos) continue;
        out.push_back(line.substr(p + 10));
    }
    return out;
}

std::string selection_context(std::string_view user_prompt) {
    std::string ctx = block(user_prompt, "[QUESTION]");
    auto topics = parse_topic_weights(block(user_prompt, "[MEMORY]"));
    std::stable_sort(topics.begin(), topics.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    // Memory is a weighted snapshot; weight maps to token mass so that
    // reinforcement and attenuation actually move the selection surrogate.
    for (std::size_t i = 0; i < topics.size() && i < 3; ++i) {
        int copies = std::max(1, static_cast<int>(std::lround(topics[i].second * 4.0)));
        for (int r = 0; r < copies; ++r) ctx += " " + topics[i].first;
    }
    std::string predicted = block(user_prompt, "[PREDICTION]");
    if (!predicted.empty()) ctx += " " + predicted;
    // Collaborative signal: who the similar users are, not their verbatim
    // questions (those may legitimately appear among the candidates).
    std::string neighbors = block(user_prompt, "[NEIGHBORS]");
    for (const auto& p : neighbor_profiles(neighbors)) ctx += " " + p;
    for (const auto& q : neighbor_questions(neighbors)) ctx += " " + q;
    return ctx;
}

std::size_t cosine_argmax(const std::vector<std::string>& candidates, std::string_view context) {
    Embedding ctx = hash_embed(context, MockBackend::kDim);
    std::size_t best = 0;
    double best_score = -2.0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        double s = cosine(hash_embed(candidates[i], MockBackend::kDim), ctx);
        if (s > best_score) {
            best_score = s;
            best = i;
        }
    }
    return best;
}

}  // namespace prompt

TopicExtractor llm_extractor(Backend& backend, const TemplateRegistry& registry,
                             const MemoryParams& params) {
    const PromptTemplate tmpl = registry.get("memory_update");
    Backend* b = &backend;
    return [tmpl, b, params](std::string_view q) -> std::vector<TopicDelta> {
        std::map<std::string, std::string> bindings{{"memory", ""}, {"question", std::string(q)}};
        for (int attempt = 0; attempt < 2; ++attempt) {
            std::string reply;
            try {
                reply = b->complete(render(tmpl, bindings));
            } catch (const std::exception& e) {
                std::cerr << "[cfqp] memory_update backend error: " << e.what() << "\n";
                continue;
            }
            json arr = json::parse(reply, nullptr, false);
            if (arr.is_discarded() || !arr.is_array()) continue;
            std::vector<TopicDelta> out;
            bool ok = true;
            for (const auto& item : arr) {
                if (!item.is_object() || !item.contains("topic") || !item["topic"].is_string() ||
                    !item.contains("delta") || !item["delta"].is_number()) {
                    ok = false;
                    break;
                }
                TopicDelta d;
                d.topic = text::trim(text::nfc(item["topic"].get<std::string>()));
                d.delta = item["delta"].get<double>();
                if (d.topic.empty() || std::abs(d.delta) > 1.0) {
                    ok = false;
                    break;
                }
                out.push_back(std::move(d));
            }
            if (ok) return out;
        }
        std::cerr << "[cfqp] memory_update fell back to deterministic extraction\n";
        return extract_topics_deterministic(q, params);
    };
}

}  // namespace cfqp
