#include "cfqp/corpus.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "cfqp/errors.hpp"
#include "cfqp/rng.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string clean_text(const std::string& raw) { return text::trim(text::nfc(raw)); }

[[noreturn]] void fail(const std::string& file, std::size_t line, const std::string& msg) {
    throw SchemaError(file + " line " + std::to_string(line) + ": " + msg);
}

json parse_line(const std::string& file, std::size_t line_no, const std::string& line) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) fail(file, line_no, "invalid JSON");
    if (!j.is_object()) fail(file, line_no, "expected a JSON object");
    return j;
}

std::string require_string(const json& j, const char* field, const std::string& file,
                           std::size_t line_no) {
    if (!j.contains(field) || !j[field].is_string()) {
        fail(file, line_no, std::string("missing or non-string field '") + field + "'");
    }
    return j[field].get<std::string>();
}

// Establishes the corpus invariants and builds the question pool.
void finalize(Corpus& corpus) {
    std::unordered_set<std::string> ids;
    for (const auto& u : corpus.users) {
        if (u.user_id.empty()) throw SchemaError("empty user_id in profiles");
        if (!ids.insert(u.user_id).second) {
            throw SchemaError("duplicate user_id '" + u.user_id + "'");
        }
    }
    std::unordered_set<std::string> seen;
    corpus.question_pool.clear();
    for (const auto& s : corpus.sessions) {
        if (!ids.count(s.user_id)) {
            throw SchemaError("session '" + s.session_id + "' references unknown user_id '" +
                              s.user_id + "'");
        }
        if (s.utterances.size() < 2) {
            throw SchemaError("session '" + s.session_id + "' has fewer than 2 turns");
        }
        for (std::size_t i = 0; i < s.utterances.size(); ++i) {
            const auto& u = s.utterances[i];
            Speaker expected = (i % 2 == 0) ? Speaker::user : Speaker::system;
            if (u.speaker != expected) {
                throw SchemaError("session '" + s.session_id +
                                  "': non-alternating speakers at turn " + std::to_string(i));
            }
            if (u.text.empty()) {
                throw SchemaError("session '" + s.session_id + "': empty text at turn " +
                                  std::to_string(i));
            }
            if (u.speaker == Speaker::user && seen.insert(u.text).second) {
                corpus.question_pool.push_back(u.text);
            }
        }
    }
}

const std::array<const char*, 16> kTopics = {
    "visa",  "hotel",   "flight",    "museum", "insurance", "loan",   "contract", "fitness",
    "train", "garden",  "piano",     "camera", "recipe",    "budget", "painting", "novel",
};

const std::array<const char*, 24> kPersonas = {
    "alpha", "bravo",  "carmen", "dexter", "elena",  "felix",  "greta", "hugo",
    "irene", "jonas",  "kira",   "lars",   "marta",  "nils",   "odette", "pavel",
    "quinn", "rosa",   "stefan", "talia",  "ursula", "viktor", "wanda", "xenia",
};

// Aspect vocabulary; each topic owns a mostly disjoint 6-word slice so
// same-topic questions share wording and cross-topic questions do not.
const std::array<const char*, 36> kAspects = {
    "fees",     "renewal",  "paperwork", "deadlines",   "quotas",       "waivers",
    "booking",  "checkout", "amenities", "discounts",   "suites",       "lobbies",
    "baggage",  "boarding", "upgrades",  "layovers",    "miles",        "seating",
    "tickets",  "exhibits", "tours",     "collections", "galleries",    "curators",
    "premiums", "claims",   "coverage",  "deductibles", "policies",     "adjusters",
    "rates",    "payoff",   "lenders",   "refinance",   "installments", "defaults",
};

}  // namespace

const UserProfile* Corpus::find_user(const std::string& user_id) const {
    for (const auto& u : users) {
        if (u.user_id == user_id) return &u;
    }
    return nullptr;
}

std::vector<const Session*> Corpus::sessions_of(const std::string& user_id) const {
    std::vector<const Session*> out;
    for (const auto& s : sessions) {
        if (s.user_id == user_id) out.push_back(&s);
    }
    return out;
}

Corpus load_corpus(const std::filesystem::path& dir) {
    const auto profiles_path = dir / "profiles.jsonl";
    const auto sessions_path = dir / "sessions.jsonl";
    if (!std::filesystem::exists(profiles_path)) {
        throw SchemaError("missing " + profiles_path.string());
    }
    if (!std::filesystem::exists(sessions_path)) {
        throw SchemaError("missing " + sessions_path.string());
    }

    Corpus corpus;
    {
        std::ifstream in(profiles_path, std::ios::binary);
        std::string line;
        std::size_t line_no = 0;
        std::unordered_set<std::string> ids;
        while (std::getline(in, line)) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            json j = parse_line("profiles.jsonl", line_no, line);
            UserProfile p;
            p.user_id = clean_text(require_string(j, "user_id", "profiles.jsonl", line_no));
            p.static_profile = clean_text(
                j.contains("static_profile")
                    ? require_string(j, "static_profile", "profiles.jsonl", line_no)
                    : std::string{});
            if (p.user_id.empty()) fail("profiles.jsonl", line_no, "empty user_id");
            if (!ids.insert(p.user_id).second) {
                fail("profiles.jsonl", line_no, "duplicate user_id '" + p.user_id + "'");
            }
            corpus.users.push_back(std::move(p));
        }
    }
    {
        std::ifstream in(sessions_path, std::ios::binary);
        std::string line;
        std::size_t line_no = 0;
        for (; std::getline(in, line);) {
            ++line_no;
            if (text::trim(line).empty()) continue;
            json j = parse_line("sessions.jsonl", line_no, line);
            Session s;
            s.session_id = clean_text(require_string(j, "session_id", "sessions.jsonl", line_no));
            s.user_id = clean_text(require_string(j, "user_id", "sessions.jsonl", line_no));
            if (!j.contains("turns") || !j["turns"].is_array()) {
                fail("sessions.jsonl", line_no, "missing or non-array field 'turns'");
            }
            int idx = 0;
            for (const auto& t : j["turns"]) {
                if (!t.is_object()) fail("sessions.jsonl", line_no, "turn is not an object");
                std::string speaker = require_string(t, "speaker", "sessions.jsonl", line_no);
                Utterance u;
                u.turn_index = idx++;
                if (speaker == "user") {
                    u.speaker = Speaker::user;
                } else if (speaker == "system") {
                    u.speaker = Speaker::system;
                } else {
                    fail("sessions.jsonl", line_no, "invalid speaker '" + speaker + "'");
                }
                u.text = clean_text(require_string(t, "text", "sessions.jsonl", line_no));
                if (u.text.empty()) fail("sessions.jsonl", line_no, "empty turn text");
                s.utterances.push_back(std::move(u));
            }
            if (s.utterances.size() < 2) {
                fail("sessions.jsonl", line_no, "session needs at least 2 turns");
            }
            for (std::size_t i = 0; i < s.utterances.size(); ++i) {
                Speaker expected = (i % 2 == 0) ? Speaker::user : Speaker::system;
                if (s.utterances[i].speaker != expected) {
                    fail("sessions.jsonl", line_no,
                         "non-alternating speakers at line " + std::to_string(line_no));
                }
            }
            corpus.sessions.push_back(std::move(s));
        }
    }
    finalize(corpus);
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "profiles.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& u : corpus.users) {
            ordered_json j;
            j["user_id"] = u.user_id;
            j["static_profile"] = u.static_profile;
            out << j.dump() << "\n";
        }
    }
    {
        std::ofstream out(dir / "sessions.jsonl", std::ios::binary | std::ios::trunc);
        for (const auto& s : corpus.sessions) {
            ordered_json j;
            j["session_id"] = s.session_id;
            j["user_id"] = s.user_id;
            j["turns"] = ordered_json::array();
            for (const auto& u : s.utterances) {
                ordered_json t;
                t["speaker"] = (u.speaker == Speaker::user) ? "user" : "system";
                t["text"] = u.text;
                j["turns"].push_back(std::move(t));
            }
            out << j.dump() << "\n";
        }
    }
}

namespace synth {

std::string topic_token(int index) {
    if (index >= 0 && index < static_cast<int>(kTopics.size())) return kTopics[index];
    return "topic" + std::to_string(index);
}

std::string persona_token(int index) {
    if (index >= 0 && index < static_cast<int>(kPersonas.size())) return kPersonas[index];
    return "persona" + std::to_string(index);
}

std::size_t question_template_count() { return 6; }

std::string aspect_token(int topic_index, int slot) {
    std::size_t base = (static_cast<std::size_t>(topic_index) * 6) % kAspects.size();
    return kAspects[(base + static_cast<std::size_t>(slot) % 6) % kAspects.size()];
}

std::string render_question(int template_index, const std::string& persona, int topic_index) {
    const std::string t = topic_token(topic_index);
    const int k = template_index % 6;
    const std::string a = aspect_token(topic_index, k);
    switch (k) {
        case 0: return persona + " seeks " + t + " " + a + " tips";
        case 1: return persona + " checking " + t + " " + a + " details";
        case 2: return persona + " comparing " + t + " " + a + " choices";
        case 3: return t + " " + a + " basics for " + persona;
        case 4: return persona + " advice regarding " + t + " " + a;
        default: return persona + " reviewing " + t + " " + a + " issues";
    }
}

std::string render_answer(int topic_index) {
    return "here is a summary of " + topic_token(topic_index) + " " +
           aspect_token(topic_index, 0) + " with key points";
}

double followup_rate() { return 0.55; }

std::string render_followup(int pick, int topic_index) {
    const std::string t = topic_token(topic_index);
    const std::string a = aspect_token(topic_index, pick);
    if (pick % 2 == 0) return "okay anything else on " + t + " " + a;
    return "hmm what about " + t + " " + a + " then";
}

}  // namespace synth

Corpus generate_synthetic(const SynthSpec& spec) {
    if (spec.n_users < 2 || spec.n_topics < 2 || spec.turns_per_session < 3 ||
        spec.drift_rate < 0.0 || spec.drift_rate > 1.0) {
        throw ConfigError("invalid SynthSpec bounds");
    }
    Corpus corpus;
    for (int ui = 0; ui < spec.n_users; ++ui) {
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "u%03d", ui);
        const std::string user_id = idbuf;
        const std::string persona = synth::persona_token(ui);

        // Per-user stream; draw order is part of the generator contract:
        // dominant topic, then per turn [drift?, template].
        SeededRng rng(mix_seed(spec.seed, "user", static_cast<std::uint64_t>(ui)));
        int dominant = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(spec.n_topics)));

        UserProfile profile;
        profile.user_id = user_id;
        // Single interest tag. Personas and aspect words stay out of the
        // profile: they would bleed into neighbor digests and distort
        // similarity scoring toward neighbor-authored questions.
        profile.static_profile = synth::topic_token(dominant);
        corpus.users.push_back(profile);

        Session session;
        session.session_id = user_id + "-s0";
        session.user_id = user_id;
        int topic = dominant;
        for (int utt = 0; utt < spec.turns_per_session; ++utt) {
            Utterance u;
            u.turn_index = utt;
            if (utt % 2 == 0) {
                // Drift is drawn once per question the user formulates.
                if (utt > 0 && rng.unit_real() < spec.drift_rate) {
                    topic = (topic + 1) % spec.n_topics;
                }
                // Some questions are terse follow-ups: no persona, aspect
                // focus.
                bool followup = utt > 0 && rng.unit_real() < synth::followup_rate();
                int pick = static_cast<int>(
                    rng.bounded(static_cast<std::uint64_t>(synth::question_template_count())));
                u.speaker = Speaker::user;
                u.text = followup ? synth::render_followup(pick, topic)
                                  : synth::render_question(pick, persona, topic);
            } else {
                u.speaker = Speaker::system;
                u.text = synth::render_answer(topic);
            }
            session.utterances.push_back(std::move(u));
        }
        corpus.sessions.push_back(std::move(session));
    }
    finalize(corpus);
    return corpus;
}

Corpus convert_chat_log(const std::filesystem::path& file) {
    if (!std::filesystem::exists(file)) {
        throw SchemaError("missing " + file.string());
    }
    Corpus corpus;
    std::unordered_set<std::string> ids;
    std::ifstream in(file, std::ios::binary);
    std::string line;
    std::size_t line_no = 0;
    const std::string fname = file.filename().string();
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = parse_line(fname, line_no, line);
        std::string session_id = clean_text(require_string(j, "session_id", fname, line_no));
        std::string user_id = clean_text(require_string(j, "user_id", fname, line_no));
        if (user_id.empty()) fail(fname, line_no, "empty user_id");
        if (ids.insert(user_id).second) {
            UserProfile p;
            p.user_id = user_id;
            if (j.contains("profile") && j["profile"].is_string()) {
                p.static_profile = clean_text(j["profile"].get<std::string>());
            }
            corpus.users.push_back(std::move(p));
        }
        if (!j.contains("turns") || !j["turns"].is_array()) {
            fail(fname, line_no, "missing or non-array field 'turns'");
        }
        // Merge consecutive same-speaker turns; drop anything before the
        // first user turn.
        std::vector<Utterance> merged;
        for (const auto& t : j["turns"]) {
            if (!t.is_object()) fail(fname, line_no, "turn is not an object");
            std::string role = text::to_lower_ascii(require_string(t, "role", fname, line_no));
            Speaker sp;
            if (role == "user") {
                sp = Speaker::user;
            } else if (role == "assistant" || role == "system" || role == "bot") {
                sp = Speaker::system;
            } else {
                fail(fname, line_no, "invalid role '" + role + "'");
            }
            std::string body = clean_text(require_string(t, "text", fname, line_no));
            if (body.empty()) continue;
            if (merged.empty() && sp != Speaker::user) continue;
            if (!merged.empty() && merged.back().speaker == sp) {
                merged.back().text += "\n" + body;
            } else {
                Utterance u;
                u.speaker = sp;
                u.text = std::move(body);
                merged.push_back(std::move(u));
            }
        }
        if (merged.size() < 2) continue;  // lossy by design
        for (std::size_t i = 0; i < merged.size(); ++i) {
            merged[i].turn_index = static_cast<int>(i);
        }
        Session s;
        s.session_id = session_id.empty() ? fname + "-" + std::to_string(line_no) : session_id;
        s.user_id = user_id;
        s.utterances = std::move(merged);
        corpus.sessions.push_back(std::move(s));
    }
    finalize(corpus);
    return corpus;
}

std::vector<std::string> question_pool_sample(const Corpus& corpus, const std::string& exclude,
                                              std::size_t m, std::uint64_t seed) {
    std::vector<std::size_t> eligible;
    eligible.reserve(corpus.question_pool.size());
    for (std::size_t i = 0; i < corpus.question_pool.size(); ++i) {
        if (corpus.question_pool[i] != exclude) eligible.push_back(i);
    }
    if (eligible.size() < m) {
        throw SchemaError("insufficient question pool: need " + std::to_string(m) + ", have " +
                          std::to_string(eligible.size()));
    }
    SeededRng rng(seed);
    auto picks = sample_indices(eligible.size(), m, rng);
    std::vector<std::string> out;
    out.reserve(m);
    for (auto p : picks) out.push_back(corpus.question_pool[eligible[p]]);
    return out;
}

}  // namespace cfqp
