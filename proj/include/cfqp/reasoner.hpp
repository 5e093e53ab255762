#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfqp/corpus.hpp"
#include "cfqp/embedder.hpp"
#include "cfqp/memory.hpp"
#include "cfqp/oracle.hpp"
#include "cfqp/social.hpp"

namespace cfqp {

struct NeighborDigest {
    std::string user_id;
    double score = 0.0;
    std::string profile_summary;                 // first 200 chars of static profile
    std::vector<std::string> typical_questions;  // up to 3, most recent distinct first
};

struct PredictionContext {
    std::string user_id;
    const CharacteristicMemory* memory = nullptr;
    std::vector<Utterance> history;  // last h utterances before q_t, turn order
    Neighborhood neighborhood;
    std::vector<NeighborDigest> neighbor_digests;
    std::string current_question;
};

struct CandidateSet {
    std::vector<std::string> candidates;  // seeded-shuffled presentation order
    std::size_t truth_index = 0;
};

enum class Correction { reinforced, attenuated, none };

struct ChallengeReport {
    TurnRef turn;
    std::string predicted;
    CandidateSet candidates;
    int chosen_index = -1;
    bool correct = false;
    Correction correction = Correction::none;
    std::optional<ErrorRecord> error_record;
    bool used_fallback = false;  // selection fell back to local argmax
    bool skipped = false;        // backend failure; turn not challenged
    std::string skip_reason;
};

struct PipelineConfig {
    bool use_memory = true;          // false = NoM
    bool use_collaboration = true;   // false = NoC
    bool use_selection_feedback = true;  // false = NoS
    std::size_t k = 3;   // neighborhood size
    std::size_t h = 6;   // history window (utterances)
    std::size_t m = 3;   // distractors per candidate set
    std::uint64_t seed = 0;
    BackendConfig backend;
    EmbedderConfig embedder;
    MemoryParams memory_params;
};

// Observation hook for rendered prompts (ablation purity checks, logging).
using PromptObserver = std::function<void(const std::string& task,
                                          const std::vector<ChatMessage>& messages)>;

// Prompt block renderers (the formats the mock backend parses).
std::string render_memory_block(const CharacteristicMemory& m);
std::string render_history_block(const std::vector<Utterance>& history);
// max_questions bounds the typical questions rendered per neighbor; the
// select prompt keeps one per neighbor to bound context noise.
std::string render_neighbors_block(const std::vector<NeighborDigest>& digests,
                                   std::size_t max_questions = 3);
std::string render_candidates_block(const CandidateSet& cands);

// Digest of one neighbor built from the corpus.
NeighborDigest make_digest(const Corpus& corpus, const Neighbor& neighbor);

// Context for predicting the successor of the user turn at `turn_index`.
PredictionContext build_context(const Corpus& corpus, const Session& session, int turn_index,
                                const CharacteristicMemory* memory,
                                const SimilarityMatrix* matrix, const PipelineConfig& cfg);

// Renders the predict template (blocks gated by the ablation flags) and
// returns the backend completion: whitespace-trimmed, first line only.
std::string predict_next(const PredictionContext& ctx, const PipelineConfig& cfg,
                         Backend& backend, const TemplateRegistry& registry,
                         const PromptObserver& observer = {});

// Plain in-context baseline: raw history + current question, nothing else.
std::string baseline_predict(const std::vector<Utterance>& history,
                             const std::string& current_question, Backend& backend,
                             const TemplateRegistry& registry,
                             const PromptObserver& observer = {});

// Ground truth + m sampled distractors, seeded-shuffled.
CandidateSet build_candidates(const std::string& truth, const Corpus& corpus, std::size_t m,
                              std::uint64_t seed);

// Asks the backend for an index; one retry on unparseable/out-of-range
// output, then a local cosine-argmax fallback. Never fails. The predicted
// question rides along in the prompt as the model's own belief about the
// next turn.
std::size_t select_candidate(const PredictionContext& ctx, const std::string& prediction,
                             const CandidateSet& cands, const PipelineConfig& cfg,
                             Backend& backend, const TemplateRegistry& registry,
                             const PromptObserver& observer = {}, bool* used_fallback = nullptr);

struct ReplayState {
    const Corpus* corpus = nullptr;
    const SimilarityMatrix* matrix = nullptr;  // required only when collaboration is on
    std::map<std::string, CharacteristicMemory> memories;
    std::vector<ErrorRecord> error_records;
    std::string stamp;  // updated_at for memory mutations
};

// Runs the closed loop over every user turn with a successor. Per-turn
// backend failures are recorded as skipped turns and the replay continues.
std::vector<ChallengeReport> replay_session(const Session& session, ReplayState& state,
                                            const PipelineConfig& cfg, Backend& backend,
                                            const TemplateRegistry& registry,
                                            const TopicExtractor& extractor,
                                            const PromptObserver& observer = {});

}  // namespace cfqp
