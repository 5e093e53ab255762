#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfqp/corpus.hpp"

namespace cfqp {

struct MemoryParams {
    double decay = 0.9;           // multiplicative decay per update
    double update_delta = 0.2;    // deterministic extractor delta
    double reinforce_delta = 0.15;
    double attenuation = 0.3;     // factor applied to wrong-choice topics
    double prune_eps = 0.01;      // weights below this are dropped
    double init_weight = 0.5;
};

struct TopicDelta {
    std::string topic;
    double delta = 0.0;  // |delta| <= 1
};

// Weighted topic snapshot per user. All mutating operations are
// value-semantic: they return a new snapshot and leave the input unchanged.
struct CharacteristicMemory {
    std::string user_id;
    std::map<std::string, double> topics;  // weight in (0,1]
    std::int64_t revision = 0;
    std::string updated_at;  // RFC3339

    bool operator==(const CharacteristicMemory&) const = default;
};

struct TurnRef {
    std::string session_id;
    std::string user_id;
    int turn_index = 0;
};

struct AttenuatedTopic {
    std::string topic;
    double old_weight = 0.0;
    double new_weight = 0.0;  // 0 when pruned
};

// Kept only for wrong selections (chosen != truth).
struct ErrorRecord {
    TurnRef turn;
    std::string predicted;
    std::string chosen;
    std::string truth;
    std::vector<AttenuatedTopic> attenuated_topics;
    std::string note;  // token-level discrepancy between predicted and truth
};

using TopicExtractor = std::function<std::vector<TopicDelta>(std::string_view)>;

// Up to 5 most frequent non-stopword tokens (ties by first occurrence),
// each with delta = params.update_delta.
std::vector<TopicDelta> extract_topics_deterministic(std::string_view text,
                                                     const MemoryParams& params = {});

TopicExtractor deterministic_extractor(const MemoryParams& params = {});

CharacteristicMemory init_memory(const UserProfile& profile, const TopicExtractor& extractor,
                                 const MemoryParams& params = {});

// Decay every weight by params.decay, apply extracted deltas (clamped to
// [0,1]), prune below eps, bump revision.
CharacteristicMemory update_memory(const CharacteristicMemory& m, std::string_view q_new,
                                   const TopicExtractor& extractor, const MemoryParams& params,
                                   const std::string& stamp);

// After a correct selection: topics of q_t and q_next each gain
// params.reinforce_delta (clamped to 1); no decay.
CharacteristicMemory reinforce(const CharacteristicMemory& m, std::string_view q_t,
                               std::string_view q_next, const TopicExtractor& extractor,
                               const MemoryParams& params, const std::string& stamp);

// After a wrong selection: existing topics of the wrong choice are halved
// (then pruned), topics of the truth gain reinforce_delta; returns the new
// memory plus the error record.
std::pair<CharacteristicMemory, ErrorRecord> attenuate(
    const CharacteristicMemory& m, std::string_view chosen, std::string_view truth,
    std::string_view predicted, const TopicExtractor& extractor, const MemoryParams& params,
    const std::string& stamp, const TurnRef& turn = {});

// Sorted symmetric token-set difference; deterministic stand-in for a
// narrative discrepancy analysis.
std::string modal_note(std::string_view predicted, std::string_view truth);

void save_memory(const CharacteristicMemory& m, const std::filesystem::path& file);
CharacteristicMemory load_memory(const std::filesystem::path& file);

}  // namespace cfqp
