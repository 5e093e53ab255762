#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace cfqp {

enum class Speaker { user, system };

struct UserProfile {
    std::string user_id;
    std::string static_profile;
};

struct Utterance {
    int turn_index = 0;
    Speaker speaker = Speaker::user;
    std::string text;
};

struct Session {
    std::string session_id;
    std::string user_id;
    std::vector<Utterance> utterances;
};

// Immutable after load; safe for concurrent readers.
struct Corpus {
    std::vector<UserProfile> users;
    std::vector<Session> sessions;
    // Distinct user-utterance texts, file order, NFC + trimmed.
    std::vector<std::string> question_pool;

    const UserProfile* find_user(const std::string& user_id) const;
    std::vector<const Session*> sessions_of(const std::string& user_id) const;
};

struct SynthSpec {
    int n_users = 2;
    int n_topics = 2;
    int turns_per_session = 3;  // utterances per session
    double drift_rate = 0.0;
    std::uint64_t seed = 0;
};

// Reads profiles.jsonl + sessions.jsonl from `dir` and establishes every
// corpus invariant. Errors cite file, line and field.
Corpus load_corpus(const std::filesystem::path& dir);

// Canonical JSONL writer (one profile / one session per line).
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

// Deterministic synthetic corpus: per-user latent topic mixture, templated
// questions carrying the user's dominant-topic token, turn-level topic drift.
// Pure function of the spec.
Corpus generate_synthetic(const SynthSpec& spec);

// Lossy adapter from a generic chat-export JSONL shape
// ({"session_id","user_id","profile"?,"turns":[{"role","text"}]}).
// Consecutive same-speaker turns are merged with a newline; leading
// non-user turns are dropped; sessions left with fewer than two turns are
// skipped. The canonical loader stays strict.
Corpus convert_chat_log(const std::filesystem::path& file);

// m distinct pool questions, none equal to `exclude`, in seed-determined
// order.
std::vector<std::string> question_pool_sample(const Corpus& corpus, const std::string& exclude,
                                              std::size_t m, std::uint64_t seed);

// Topic/persona vocabularies used by the synthetic generator; exposed so
// tests can re-simulate generation independently.
namespace synth {
std::string topic_token(int index);
std::string persona_token(int index);
std::string aspect_token(int topic_index, int slot);
std::size_t question_template_count();
std::string render_question(int template_index, const std::string& persona, int topic_index);
std::string render_answer(int topic_index);
double followup_rate();
std::string render_followup(int pick, int topic_index);
}  // namespace synth

}  // namespace cfqp
