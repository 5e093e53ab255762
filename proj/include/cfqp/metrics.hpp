#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cfqp/embedder.hpp"
#include "cfqp/memory.hpp"
#include "cfqp/oracle.hpp"
#include "cfqp/reasoner.hpp"

namespace cfqp {

// Word-set overlap over the shared tokenizer. Both empty -> 1, one empty
// -> 0.
double jaccard(std::string_view pred, std::string_view truth);

// Cosine of the two text embeddings under the configured provider.
double semantic_sim(std::string_view pred, std::string_view truth, Embedder& embedder);

// LLM-as-judge score in [0,1]. Unparseable replies get one retry, then the
// score is absent (excluded from means, counted in the report).
std::optional<double> judge(std::string_view pred, std::string_view truth, Backend& backend,
                            const TemplateRegistry& registry);

struct TurnScore {
    TurnRef turn;
    double jaccard = 0.0;
    double semantic = 0.0;
    std::optional<double> judge;
};

struct EvalReport {
    std::string method;
    std::string dataset;
    double mean_jaccard = 0.0;
    double mean_semantic = 0.0;
    std::optional<double> mean_judge;
    std::optional<double> accuracy_pct;  // over challenged turns
    std::size_t n_turns = 0;
    std::size_t n_judged = 0;
    std::size_t n_challenged = 0;
    std::size_t n_correct = 0;
    std::string config_hash;
};

// Arithmetic means over scored turns; accuracy over challenged turns only.
EvalReport aggregate(const std::vector<ChallengeReport>& reports,
                     const std::vector<TurnScore>& scores, const std::string& method,
                     const std::string& dataset, const std::string& config_hash);

// Fixed-width table over one or more rows (Jaccard / Cosine / Judge /
// Accuracy). Absent values print "-".
std::string format_table(const std::vector<EvalReport>& rows);

std::string eval_report_json(const EvalReport& report);

// Per-turn CSV (session_id,user_id,turn_index,jaccard,semantic,judge).
std::string scores_csv(const std::vector<TurnScore>& scores);

}  // namespace cfqp
