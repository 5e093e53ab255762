#include "cfqp/metrics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <set>

#include "cfqp/errors.hpp"
#include "cfqp/social.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

using nlohmann::ordered_json;

double jaccard(std::string_view pred, std::string_view truth) {
    std::set<std::string> a, b;
    for (const auto& t : text::tokenize(pred)) a.insert(t);
    for (const auto& t : text::tokenize(truth)) b.insert(t);
    if (a.empty() && b.empty()) return 1.0;
    if (a.empty() || b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& t : a) inter += b.count(t);
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

double semantic_sim(std::string_view pred, std::string_view truth, Embedder& embedder) {
    return cosine(embedder.embed(pred), embedder.embed(truth));
}

std::optional<double> judge(std::string_view pred, std::string_view truth, Backend& backend,
                            const TemplateRegistry& registry) {
    std::map<std::string, std::string> bindings{
        {"prediction", std::string(pred)},
        {"truth", std::string(truth)},
    };
    auto messages = render(registry.get("judge"), bindings);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply;
        try {
            reply = backend.complete(messages);
        } catch (const std::exception&) {
            continue;
        }
        if (auto v = text::parse_first_real(reply)) {
            return std::clamp(*v, 0.0, 1.0);
        }
    }
    return std::nullopt;
}

EvalReport aggregate(const std::vector<ChallengeReport>& reports,
                     const std::vector<TurnScore>& scores, const std::string& method,
                     const std::string& dataset, const std::string& config_hash) {
    if (scores.empty()) throw ConfigError("aggregate: no scored turns");
    EvalReport out;
    out.method = method;
    out.dataset = dataset;
    out.config_hash = config_hash;
    out.n_turns = scores.size();
    double jsum = 0.0, ssum = 0.0, judge_sum = 0.0;
    for (const auto& s : scores) {
        jsum += s.jaccard;
        ssum += s.semantic;
        if (s.judge) {
            judge_sum += *s.judge;
            ++out.n_judged;
        }
    }
    out.mean_jaccard = jsum / static_cast<double>(out.n_turns);
    out.mean_semantic = ssum / static_cast<double>(out.n_turns);
    if (out.n_judged > 0) out.mean_judge = judge_sum / static_cast<double>(out.n_judged);
    for (const auto& r : reports) {
        if (r.skipped) continue;
        ++out.n_challenged;
        if (r.correct) ++out.n_correct;
    }
    if (out.n_challenged > 0) {
        out.accuracy_pct =
            100.0 * static_cast<double>(out.n_correct) / static_cast<double>(out.n_challenged);
    }
    return out;
}

namespace {

std::string cell(std::optional<double> v, const char* fmt) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), fmt, *v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    if (s.size() >= width) return s;
    return s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_table(const std::vector<EvalReport>& rows) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Method", "Dataset", "Jaccard", "Cosine", "Judge", "Accuracy(%)", "Turns"});
    for (const auto& r : rows) {
        grid.push_back({
            r.method,
            r.dataset,
            cell(r.mean_jaccard, "%.4f"),
            cell(r.mean_semantic, "%.4f"),
            cell(r.mean_judge, "%.4f"),
            cell(r.accuracy_pct, "%.2f"),
            std::to_string(r.n_turns),
        });
    }
    std::vector<std::size_t> widths(grid[0].size(), 0);
    for (const auto& row : grid) {
        for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
    }
    std::string out;
    for (std::size_t ri = 0; ri < grid.size(); ++ri) {
        for (std::size_t c = 0; c < grid[ri].size(); ++c) {
            out += pad(grid[ri][c], widths[c] + (c + 1 < grid[ri].size() ? 2 : 0));
        }
        out += "\n";
        if (ri == 0) {
            std::size_t total = 0;
            for (std::size_t c = 0; c < widths.size(); ++c) {
                total += widths[c] + (c + 1 < widths.size() ? 2 : 0);
            }
            out += std::string(total, '-') + "\n";
        }
    }
    return out;
}

std::string eval_report_json(const EvalReport& r) {
    ordered_json j;
    j["method"] = r.method;
    j["dataset"] = r.dataset;
    j["mean_jaccard"] = r.mean_jaccard;
    j["mean_semantic"] = r.mean_semantic;
    if (r.mean_judge) {
        j["mean_judge"] = *r.mean_judge;
    } else {
        j["mean_judge"] = nullptr;
    }
    if (r.accuracy_pct) {
        j["accuracy_pct"] = *r.accuracy_pct;
    } else {
        j["accuracy_pct"] = nullptr;
    }
    j["n_turns"] = r.n_turns;
    j["n_judged"] = r.n_judged;
    j["n_challenged"] = r.n_challenged;
    j["n_correct"] = r.n_correct;
    j["config_hash"] = r.config_hash;
    return j.dump(2);
}

std::string scores_csv(const std::vector<TurnScore>& scores) {
    std::string out = "session_id,user_id,turn_index,jaccard,semantic,judge\n";
    char buf[64];
    for (const auto& s : scores) {
        out += s.turn.session_id + "," + s.turn.user_id + "," + std::to_string(s.turn.turn_index);
        std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,", s.jaccard, s.semantic);
        out += buf;
        out += s.judge ? cell(s.judge, "%.4f") : "-";
        out += "\n";
    }
    return out;
}

}  // namespace cfqp
