#include "cfqp/reasoner.hpp"

#include <algorithm>
#include <iostream>

#include "cfqp/errors.hpp"
#include "cfqp/rng.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

namespace {

std::string single_line(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

// First 200 codepoints, UTF-8 safe.
std::string summary_200(const std::string& s) {
    std::size_t count = 0;
    std::size_t i = 0;
    while (i < s.size() && count < 200) {
        unsigned char b = static_cast<unsigned char>(s[i]);
        std::size_t len = (b < 0x80) ? 1 : (b < 0xE0) ? 2 : (b < 0xF0) ? 3 : 4;
        i += len;
        ++count;
    }
    return single_line(s.substr(0, std::min(i, s.size())));
}

std::string first_line_trimmed(const std::string& s) {
    std::string t = text::trim(s);
    auto nl = t.find('\n');
    if (nl != std::string::npos) t = t.substr(0, nl);
    return text::trim(t);
}

std::map<std::string, std::string> context_bindings(const PredictionContext& ctx,
                                                    const PipelineConfig& cfg) {
    std::map<std::string, std::string> b;
    b["memory"] = (cfg.use_memory && ctx.memory) ? render_memory_block(*ctx.memory) : "";
    b["history"] = ctx.history.empty() ? "" : render_history_block(ctx.history);
    b["neighbors"] = (cfg.use_collaboration && !ctx.neighbor_digests.empty())
                         ? render_neighbors_block(ctx.neighbor_digests)
                         : "";
    b["question"] = single_line(ctx.current_question);
    return b;
}

}  // namespace

std::string render_memory_block(const CharacteristicMemory& m) {
    std::vector<std::pair<std::string, double>> sorted(m.topics.begin(), m.topics.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    std::string line;
    for (const auto& [topic, w] : sorted) {
        if (!line.empty()) line += ", ";
        line += topic + "(" + text::format_weight(w) + ")";
    }
    if (line.empty()) line = "none";
    return "[MEMORY]\n" + line + "\n\n";
}

std::string render_history_block(const std::vector<Utterance>& history) {
    std::string out = "[HISTORY]\n";
    for (const auto& u : history) {
        out += (u.speaker == Speaker::user) ? "user: " : "system: ";
        out += single_line(u.text) + "\n";
    }
    return out + "\n";
}

std::string render_neighbors_block(const std::vector<NeighborDigest>& digests,
                                   std::size_t max_questions) {
    std::string out = "[NEIGHBORS]\n";
    char buf[32];
    for (const auto& d : digests) {
        std::snprintf(buf, sizeof(buf), "%.4f", d.score);
        out += "- " + d.user_id + " (similarity " + buf + ") profile: " + d.profile_summary + "\n";
        std::size_t shown = 0;
        for (const auto& q : d.typical_questions) {
            if (shown++ == max_questions) break;
            out += "  Q: " + single_line(q) + "\n";
        }
    }
    return out + "\n";
}

std::string render_candidates_block(const CandidateSet& cands) {
    std::string out;
    for (std::size_t i = 0; i < cands.candidates.size(); ++i) {
        out += std::to_string(i) + ") " + single_line(cands.candidates[i]);
        if (i + 1 < cands.candidates.size()) out += "\n";
    }
    return out;
}

NeighborDigest make_digest(const Corpus& corpus, const Neighbor& neighbor) {
    NeighborDigest d;
    d.user_id = neighbor.user_id;
    d.score = neighbor.score;
    if (const UserProfile* p = corpus.find_user(neighbor.user_id)) {
        d.profile_summary = summary_200(p->static_profile);
    }
    // Most recent distinct questions, newest first.
    std::vector<std::string> all;
    for (const Session* s : corpus.sessions_of(neighbor.user_id)) {
        for (const auto& u : s->utterances) {
            if (u.speaker == Speaker::user) all.push_back(u.text);
        }
    }
    for (auto it = all.rbegin(); it != all.rend() && d.typical_questions.size() < 3; ++it) {
        if (std::find(d.typical_questions.begin(), d.typical_questions.end(), *it) ==
            d.typical_questions.end()) {
            d.typical_questions.push_back(*it);
        }
    }
    return d;
}

PredictionContext build_context(const Corpus& corpus, const Session& session, int turn_index,
                                const CharacteristicMemory* memory,
                                const SimilarityMatrix* matrix, const PipelineConfig& cfg) {
    PredictionContext ctx;
    ctx.user_id = session.user_id;
    ctx.memory = memory;
    // History is everything strictly before q_t; q_t is its own block.
    for (const auto& u : session.utterances) {
        if (u.turn_index < turn_index) ctx.history.push_back(u);
        if (u.turn_index == turn_index) ctx.current_question = u.text;
    }
    if (ctx.history.size() > cfg.h) {
        ctx.history.erase(ctx.history.begin(),
                          ctx.history.begin() + (ctx.history.size() - cfg.h));
    }
    if (cfg.use_collaboration && matrix) {
        ctx.neighborhood = top_k(*matrix, session.user_id, cfg.k);
        for (const auto& n : ctx.neighborhood.neighbors) {
            ctx.neighbor_digests.push_back(make_digest(corpus, n));
        }
    }
    return ctx;
}

std::string predict_next(const PredictionContext& ctx, const PipelineConfig& cfg,
                         Backend& backend, const TemplateRegistry& registry,
                         const PromptObserver& observer) {
    auto messages = render(registry.get("predict"), context_bindings(ctx, cfg));
    if (observer) observer("predict", messages);
    return first_line_trimmed(backend.complete(messages));
}

std::string baseline_predict(const std::vector<Utterance>& history,
                             const std::string& current_question, Backend& backend,
                             const TemplateRegistry& registry, const PromptObserver& observer) {
    std::map<std::string, std::string> b;
    b["memory"] = "";
    b["neighbors"] = "";
    b["history"] = history.empty() ? "" : render_history_block(history);
    b["question"] = single_line(current_question);
    auto messages = render(registry.get("predict"), b);
    if (observer) observer("predict", messages);
    return first_line_trimmed(backend.complete(messages));
}

CandidateSet build_candidates(const std::string& truth, const Corpus& corpus, std::size_t m,
                              std::uint64_t seed) {
    CandidateSet set;
    set.candidates = question_pool_sample(corpus, truth, m, mix_seed(seed, "distractors"));
    set.candidates.push_back(truth);
    SeededRng rng(mix_seed(seed, "shuffle"));
    seeded_shuffle(set.candidates, rng);
    for (std::size_t i = 0; i < set.candidates.size(); ++i) {
        if (set.candidates[i] == truth) {
            set.truth_index = i;
            break;
        }
    }
    return set;
}

std::size_t select_candidate(const PredictionContext& ctx, const std::string& prediction,
                             const CandidateSet& cands, const PipelineConfig& cfg,
                             Backend& backend, const TemplateRegistry& registry,
                             const PromptObserver& observer, bool* used_fallback) {
    if (used_fallback) *used_fallback = false;
    if (cands.candidates.size() == 1) return 0;

    auto bindings = context_bindings(ctx, cfg);
    if (cfg.use_collaboration && !ctx.neighbor_digests.empty()) {
        // Profiles only: a neighbor's verbatim question may itself be a
        // candidate, and quoting it would rig the similarity scoring.
        bindings["neighbors"] = render_neighbors_block(ctx.neighbor_digests, 0);
    }
    bindings["prediction"] = single_line(prediction);
    bindings["candidates"] = render_candidates_block(cands);
    auto messages = render(registry.get("select"), bindings);
    if (observer) observer("select", messages);

    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply;
        try {
            reply = backend.complete(messages);
        } catch (const std::exception& e) {
            std::cerr << "[cfqp] select backend error: " << e.what() << "\n";
            continue;
        }
        auto idx = text::parse_strict_int(first_line_trimmed(reply));
        if (idx && *idx >= 0 && static_cast<std::size_t>(*idx) < cands.candidates.size()) {
            return static_cast<std::size_t>(*idx);
        }
    }
    // Local fallback mirrors the mock's scoring against the same prompt.
    if (used_fallback) *used_fallback = true;
    std::cerr << "[cfqp] select fell back to local cosine argmax\n";
    std::string user_prompt;
    for (const auto& msg : messages) {
        if (msg.role == "user") user_prompt = msg.content;
    }
    return prompt::cosine_argmax(cands.candidates, prompt::selection_context(user_prompt));
}

std::vector<ChallengeReport> replay_session(const Session& session, ReplayState& state,
                                            const PipelineConfig& cfg, Backend& backend,
                                            const TemplateRegistry& registry,
                                            const TopicExtractor& extractor,
                                            const PromptObserver& observer) {
    if (!state.corpus) throw ConfigError("replay needs a corpus");
    std::vector<int> user_turns;
    for (const auto& u : session.utterances) {
        if (u.speaker == Speaker::user) user_turns.push_back(u.turn_index);
    }
    std::vector<ChallengeReport> reports;
    if (user_turns.size() < 2) return reports;

    const UserProfile* profile = state.corpus->find_user(session.user_id);
    if (!profile) throw SchemaError("session user '" + session.user_id + "' not in corpus");
    if (cfg.use_memory && !state.memories.count(session.user_id)) {
        state.memories.emplace(session.user_id,
                               init_memory(*profile, extractor, cfg.memory_params));
    }

    for (std::size_t i = 0; i + 1 < user_turns.size(); ++i) {
        const int t = user_turns[i];
        const std::string& q_t = session.utterances[t].text;
        const std::string& q_next = session.utterances[user_turns[i + 1]].text;
        ChallengeReport report;
        report.turn = TurnRef{session.session_id, session.user_id, t};

        std::uint64_t turn_seed =
            mix_seed(cfg.seed, session.session_id, static_cast<std::uint64_t>(t));
        try {
            if (cfg.use_memory) {
                auto& mem = state.memories.at(session.user_id);
                mem = update_memory(mem, q_t, extractor, cfg.memory_params, state.stamp);
            }
            const CharacteristicMemory* mem_ptr =
                cfg.use_memory ? &state.memories.at(session.user_id) : nullptr;
            PredictionContext ctx =
                build_context(*state.corpus, session, t, mem_ptr, state.matrix, cfg);

            report.predicted = predict_next(ctx, cfg, backend, registry, observer);
            report.candidates = build_candidates(q_next, *state.corpus, cfg.m, turn_seed);
            report.chosen_index = static_cast<int>(
                select_candidate(ctx, report.predicted, report.candidates, cfg, backend, registry,
                                 observer, &report.used_fallback));
            report.correct =
                static_cast<std::size_t>(report.chosen_index) == report.candidates.truth_index;

            if (cfg.use_selection_feedback && cfg.use_memory) {
                auto& mem = state.memories.at(session.user_id);
                if (report.correct) {
                    mem = reinforce(mem, q_t, q_next, extractor, cfg.memory_params, state.stamp);
                    report.correction = Correction::reinforced;
                } else {
                    auto [next_mem, record] = attenuate(
                        mem, report.candidates.candidates[report.chosen_index], q_next,
                        report.predicted, extractor, cfg.memory_params, state.stamp, report.turn);
                    mem = std::move(next_mem);
                    report.error_record = record;
                    state.error_records.push_back(std::move(record));
                    report.correction = Correction::attenuated;
                }
            } else {
                report.correction = Correction::none;
            }
        } catch (const TransportError& e) {
            report.skipped = true;
            report.skip_reason = e.what();
            std::cerr << "[cfqp] turn skipped (" << session.session_id << " turn " << t
                      << "): " << e.what() << "\n";
        }
        reports.push_back(std::move(report));
    }
    return reports;
}

}  // namespace cfqp
