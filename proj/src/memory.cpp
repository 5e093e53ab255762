#include "cfqp/memory.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <set>

#include "cfqp/errors.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

using nlohmann::ordered_json;

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void prune(std::map<std::string, double>& topics, double eps) {
    for (auto it = topics.begin(); it != topics.end();) {
        if (it->second < eps) {
            it = topics.erase(it);
        } else {
            ++it;
        }
    }
}

// Distinct topic names extracted from one or two texts, insertion order.
std::vector<std::string> extracted_names(const TopicExtractor& extractor, std::string_view a,
                                         std::string_view b = {}) {
    std::vector<std::string> names;
    auto add = [&](std::string_view t) {
        for (const auto& d : extractor(t)) {
            if (std::find(names.begin(), names.end(), d.topic) == names.end()) {
                names.push_back(d.topic);
            }
        }
    };
    add(a);
    if (!b.empty()) add(b);
    return names;
}

}  // namespace

std::vector<TopicDelta> extract_topics_deterministic(std::string_view text_in,
                                                     const MemoryParams& params) {
    std::vector<std::string> order;     // first-occurrence order
    std::map<std::string, int> counts;
    for (const auto& tok : text::tokenize(text_in)) {
        if (text::is_stopword(tok)) continue;
        if (counts.emplace(tok, 0).second) order.push_back(tok);
        ++counts[tok];
    }
    // Sort by frequency desc; ties keep first-occurrence order.
    std::vector<std::string> ranked = order;
    std::stable_sort(ranked.begin(), ranked.end(), [&](const std::string& a, const std::string& b) {
        return counts[a] > counts[b];
    });
    if (ranked.size() > 5) ranked.resize(5);
    std::vector<TopicDelta> out;
    out.reserve(ranked.size());
    for (auto& t : ranked) out.push_back({text::nfc(t), params.update_delta});
    return out;
}

TopicExtractor deterministic_extractor(const MemoryParams& params) {
    return [params](std::string_view t) { return extract_topics_deterministic(t, params); };
}

CharacteristicMemory init_memory(const UserProfile& profile, const TopicExtractor& extractor,
                                 const MemoryParams& params) {
    CharacteristicMemory m;
    m.user_id = profile.user_id;
    m.revision = 0;
    for (const auto& d : extractor(profile.static_profile)) {
        m.topics[d.topic] = params.init_weight;
    }
    prune(m.topics, params.prune_eps);
    return m;
}

CharacteristicMemory update_memory(const CharacteristicMemory& m, std::string_view q_new,
                                   const TopicExtractor& extractor, const MemoryParams& params,
                                   const std::string& stamp) {
    CharacteristicMemory next = m;
    for (auto& [topic, w] : next.topics) w *= params.decay;
    for (const auto& d : extractor(q_new)) {
        if (d.topic.empty() || std::abs(d.delta) > 1.0) continue;  // invalid delta skipped
        auto it = next.topics.find(d.topic);
        double old = (it == next.topics.end()) ? 0.0 : it->second;
        next.topics[d.topic] = clamp01(old + d.delta);
    }
    prune(next.topics, params.prune_eps);
    next.revision = m.revision + 1;
    next.updated_at = stamp;
    return next;
}

CharacteristicMemory reinforce(const CharacteristicMemory& m, std::string_view q_t,
                               std::string_view q_next, const TopicExtractor& extractor,
                               const MemoryParams& params, const std::string& stamp) {
    CharacteristicMemory next = m;
    for (const auto& name : extracted_names(extractor, q_t, q_next)) {
        auto it = next.topics.find(name);
        double old = (it == next.topics.end()) ? 0.0 : it->second;
        next.topics[name] = clamp01(old + params.reinforce_delta);
    }
    prune(next.topics, params.prune_eps);
    next.revision = m.revision + 1;
    next.updated_at = stamp;
    return next;
}

std::pair<CharacteristicMemory, ErrorRecord> attenuate(
    const CharacteristicMemory& m, std::string_view chosen, std::string_view truth,
    std::string_view predicted, const TopicExtractor& extractor, const MemoryParams& params,
    const std::string& stamp, const TurnRef& turn) {
    CharacteristicMemory next = m;
    ErrorRecord record;
    record.turn = turn;
    record.predicted = std::string(predicted);
    record.chosen = std::string(chosen);
    record.truth = std::string(truth);
    record.note = modal_note(predicted, truth);

    const auto chosen_names = extracted_names(extractor, chosen);
    for (const auto& name : chosen_names) {
        auto it = next.topics.find(name);
        if (it == next.topics.end()) continue;  // only existing topics attenuate
        double old = it->second;
        double reduced = old * params.attenuation;
        if (reduced < params.prune_eps) {
            next.topics.erase(it);
            record.attenuated_topics.push_back({name, old, 0.0});
        } else {
            it->second = reduced;
            record.attenuated_topics.push_back({name, old, reduced});
        }
    }
    for (const auto& name : extracted_names(extractor, truth)) {
        // Topics shared with the wrong choice stay attenuated; boosting them
        // would break the monotone-direction guarantee.
        if (std::find(chosen_names.begin(), chosen_names.end(), name) != chosen_names.end()) {
            continue;
        }
        auto it = next.topics.find(name);
        double old = (it == next.topics.end()) ? 0.0 : it->second;
        next.topics[name] = clamp01(old + params.reinforce_delta);
    }
    prune(next.topics, params.prune_eps);
    next.revision = m.revision + 1;
    next.updated_at = stamp;
    return {std::move(next), std::move(record)};
}

std::string modal_note(std::string_view predicted, std::string_view truth) {
    std::set<std::string> a, b;
    for (const auto& t : text::tokenize(predicted)) a.insert(t);
    for (const auto& t : text::tokenize(truth)) b.insert(t);
    std::vector<std::string> diff;
    std::set_symmetric_difference(a.begin(), a.end(), b.begin(), b.end(),
                                  std::back_inserter(diff));
    if (diff.empty()) return "token sets identical";
    return "token difference: " + text::join(diff, " ");
}

void save_memory(const CharacteristicMemory& m, const std::filesystem::path& file) {
    ordered_json j;
    j["user_id"] = m.user_id;
    j["revision"] = m.revision;
    j["topics"] = ordered_json::object();
    for (const auto& [topic, w] : m.topics) j["topics"][topic] = w;
    j["updated_at"] = m.updated_at;
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
}

CharacteristicMemory load_memory(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError("cannot open memory file " + file.string());
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("user_id") || !j.contains("topics")) {
        throw SchemaError("malformed memory file " + file.string());
    }
    CharacteristicMemory m;
    m.user_id = j["user_id"].get<std::string>();
    m.revision = j.value("revision", 0);
    m.updated_at = j.value("updated_at", "");
    for (const auto& [topic, w] : j["topics"].items()) {
        m.topics[topic] = w.get<double>();
    }
    return m;
}

}  // namespace cfqp
