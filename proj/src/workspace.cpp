#include "cfqp/workspace.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <fstream>
#include <iostream>

#include "cfqp/errors.hpp"
#include "cfqp/rng.hpp"
#include "cfqp/social.hpp"
#include "cfqp/text.hpp"

namespace cfqp {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

json default_config() {
    json c;
    c["dataset_label"] = "";
    c["k"] = 3;
    c["m"] = 3;
    c["h"] = 6;
    c["embedder"] = {{"provider", "hash"}, {"dim", 768}};
    c["backend"] = {{"kind", "mock"},   {"endpoint", ""},       {"model", "mock"},
                    {"temperature", 0.0}, {"max_retries", 2},   {"timeout_ms", 30000}};
    c["memory"] = {{"decay", 0.9},        {"update_delta", 0.2}, {"reinforce_delta", 0.15},
                   {"attenuation", 0.3},  {"prune_eps", 0.01},   {"init_weight", 0.5}};
    return c;
}

std::string correction_name(Correction c) {
    switch (c) {
        case Correction::reinforced: return "reinforced";
        case Correction::attenuated: return "attenuated";
        case Correction::none: return "none";
    }
    return "none";
}

Correction parse_correction(const std::string& s) {
    if (s == "reinforced") return Correction::reinforced;
    if (s == "attenuated") return Correction::attenuated;
    return Correction::none;
}

MemoryParams memory_params_from(const json& cfg) {
    MemoryParams p;
    if (!cfg.contains("memory")) return p;
    const auto& m = cfg["memory"];
    p.decay = m.value("decay", p.decay);
    p.update_delta = m.value("update_delta", p.update_delta);
    p.reinforce_delta = m.value("reinforce_delta", p.reinforce_delta);
    p.attenuation = m.value("attenuation", p.attenuation);
    p.prune_eps = m.value("prune_eps", p.prune_eps);
    p.init_weight = m.value("init_weight", p.init_weight);
    return p;
}

}  // namespace

std::string method_name(RunMethod m) {
    switch (m) {
        case RunMethod::cfqp: return "cfqp";
        case RunMethod::baseline: return "baseline";
        case RunMethod::noc: return "cfqp-noc";
        case RunMethod::nom: return "cfqp-nom";
        case RunMethod::nos: return "cfqp-nos";
    }
    return "cfqp";
}

std::optional<RunMethod> parse_method(const std::string& name) {
    if (name == "cfqp") return RunMethod::cfqp;
    if (name == "baseline") return RunMethod::baseline;
    if (name == "cfqp-noc") return RunMethod::noc;
    if (name == "cfqp-nom") return RunMethod::nom;
    if (name == "cfqp-nos") return RunMethod::nos;
    return std::nullopt;
}

Workspace::Workspace(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
    std::filesystem::create_directories(corpus_dir());
    std::filesystem::create_directories(memories_dir());
    std::filesystem::create_directories(reports_dir());
    std::filesystem::create_directories(templates_dir());

    auto lock_path = root_ / ".lock";
    lock_fd_ = ::open(lock_path.c_str(), O_CREAT | O_RDWR, 0644);
    if (lock_fd_ < 0 || ::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
        if (lock_fd_ >= 0) ::close(lock_fd_);
        throw ConfigError("workspace is locked by another command: " + root_.string());
    }

    if (std::filesystem::exists(config_file())) {
        std::ifstream in(config_file(), std::ios::binary);
        config_ = json::parse(in, nullptr, false);
        if (config_.is_discarded()) {
            throw ConfigError("malformed workspace config " + config_file().string());
        }
    } else {
        config_ = default_config();
        save_config();
    }
}

Workspace::~Workspace() {
    if (lock_fd_ >= 0) {
        ::flock(lock_fd_, LOCK_UN);
        ::close(lock_fd_);
    }
}

void Workspace::save_config() {
    std::ofstream out(config_file(), std::ios::binary | std::ios::trunc);
    out << config_.dump(2) << "\n";
}

std::string Workspace::hash_config(const json& resolved) {
    return text::sha256_hex(resolved.dump()).substr(0, 16);
}

void Workspace::note_read(const std::filesystem::path& p) {
    reads_.push_back(p.lexically_normal().string());
}

int cmd_ingest(Workspace& ws, const std::filesystem::path& source, const std::string& format) {
    Corpus corpus;
    if (format == "canonical") {
        ws.note_read(source);
        corpus = load_corpus(source);
    } else if (format == "chatjson") {
        ws.note_read(source);
        corpus = convert_chat_log(source);
    } else {
        std::cerr << "unknown ingest format '" << format << "' (canonical|chatjson)\n";
        return 2;
    }
    save_corpus(corpus, ws.corpus_dir());
    ws.config()["dataset_label"] = source.filename().string();
    ws.save_config();
    std::cout << "ingested: users=" << corpus.users.size() << " sessions=" << corpus.sessions.size()
              << " pool=" << corpus.question_pool.size() << "\n";
    return 0;
}

int cmd_synth(Workspace& ws, const SynthSpec& spec) {
    Corpus corpus = generate_synthetic(spec);
    save_corpus(corpus, ws.corpus_dir());
    ws.config()["dataset_label"] = "synthetic-u" + std::to_string(spec.n_users) + "-t" +
                                   std::to_string(spec.n_topics) + "-s" +
                                   std::to_string(spec.seed);
    ws.save_config();
    std::cout << "synthesized: users=" << corpus.users.size()
              << " sessions=" << corpus.sessions.size() << " pool=" << corpus.question_pool.size()
              << "\n";
    return 0;
}

int cmd_build(Workspace& ws, const EmbedderConfig& embedder_cfg, http::PostFn transport) {
    ws.note_read(ws.corpus_dir() / "profiles.jsonl");
    ws.note_read(ws.corpus_dir() / "sessions.jsonl");
    Corpus corpus = load_corpus(ws.corpus_dir());

    EmbedderConfig ecfg = embedder_cfg;
    if (!ecfg.cache_path) ecfg.cache_path = ws.cache_file();
    Embedder embedder(ecfg, std::move(transport));

    std::vector<UserDocument> docs;
    docs.reserve(corpus.users.size());
    for (const auto& u : corpus.users) {
        docs.push_back(build_document(u, corpus.sessions_of(u.user_id)));
    }
    SimilarityMatrix matrix = build_matrix(docs, embedder);
    matrix.save(ws.matrix_file());
    std::cout << "built matrix: users=" << matrix.size() << " dim=" << ecfg.dim << " -> "
              << ws.matrix_file().string() << "\n";
    return 0;
}

int cmd_run(Workspace& ws, const RunOptions& opts) {
    ws.note_read(ws.corpus_dir() / "profiles.jsonl");
    ws.note_read(ws.corpus_dir() / "sessions.jsonl");
    Corpus corpus = load_corpus(ws.corpus_dir());

    PipelineConfig cfg;
    cfg.use_memory = (opts.method != RunMethod::nom && opts.method != RunMethod::baseline);
    cfg.use_collaboration = (opts.method != RunMethod::noc && opts.method != RunMethod::baseline);
    cfg.use_selection_feedback =
        (opts.method != RunMethod::nos && opts.method != RunMethod::baseline);
    cfg.k = opts.k;
    cfg.m = opts.m;
    cfg.h = opts.h;
    cfg.seed = opts.seed;
    cfg.backend = opts.backend;
    cfg.memory_params = memory_params_from(ws.config());

    TemplateRegistry registry;
    registry.write_builtins(ws.templates_dir());
    registry.load_dir(ws.templates_dir());

    SimilarityMatrix matrix;
    if (cfg.use_collaboration) {
        if (!std::filesystem::exists(ws.matrix_file())) {
            std::cerr << "matrix.json missing; run `cfqp build` first\n";
            return 2;
        }
        ws.note_read(ws.matrix_file());
        matrix = SimilarityMatrix::load(ws.matrix_file());
    }

    std::unique_ptr<Backend> backend;
    try {
        backend = make_backend(cfg.backend, opts.transport);
    } catch (const std::exception& e) {
        std::cerr << "backend config error: " << e.what() << "\n";
        return 2;
    }
    TopicExtractor extractor = opts.llm_extractor_mode
                                   ? llm_extractor(*backend, registry, cfg.memory_params)
                                   : deterministic_extractor(cfg.memory_params);

    // Resolved-config hash embedded in every artifact of this run.
    json resolved = ws.config();
    resolved["method"] = method_name(opts.method);
    resolved["seed"] = opts.seed;
    resolved["k"] = opts.k;
    resolved["m"] = opts.m;
    resolved["h"] = opts.h;
    resolved["backend"]["kind"] = (cfg.backend.kind == BackendKind::mock) ? "mock" : "remote";
    resolved["backend"]["model"] = cfg.backend.model_name;
    resolved["backend"]["endpoint"] = cfg.backend.endpoint;
    const std::string config_hash = Workspace::hash_config(resolved);

    ReplayState state;
    state.corpus = &corpus;
    state.matrix = cfg.use_collaboration ? &matrix : nullptr;
    state.stamp = text::now_rfc3339();

    const std::string run_name = method_name(opts.method) + "-seed" + std::to_string(opts.seed);
    std::ofstream prompts_out;
    PromptObserver observer;
    if (opts.log_prompts) {
        prompts_out.open(ws.reports_dir() / (run_name + ".prompts.jsonl"),
                         std::ios::binary | std::ios::trunc);
        observer = [&prompts_out](const std::string& task,
                                  const std::vector<ChatMessage>& messages) {
            ordered_json j;
            j["task"] = task;
            for (const auto& m : messages) j[m.role] = m.content;
            prompts_out << j.dump() << "\n";
        };
    }

    std::vector<ChallengeReport> all_reports;
    std::size_t fallbacks = 0, skipped = 0;
    for (const auto& session : corpus.sessions) {
        auto reports = replay_session(session, state, cfg, *backend, registry, extractor, observer);
        for (auto& r : reports) {
            fallbacks += r.used_fallback ? 1 : 0;
            skipped += r.skipped ? 1 : 0;
            all_reports.push_back(std::move(r));
        }
    }

    // Replay output: meta line, then one ChallengeReport per line.
    auto report_path = ws.reports_dir() / (run_name + ".jsonl");
    {
        std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
        ordered_json meta;
        meta["type"] = "run_meta";
        meta["method"] = method_name(opts.method);
        meta["seed"] = opts.seed;
        meta["config_hash"] = config_hash;
        meta["template_hashes"] = registry.hashes();
        meta["dataset_label"] = ws.config().value("dataset_label", "");
        out << meta.dump() << "\n";
        for (const auto& r : all_reports) out << report_to_json(r).dump() << "\n";
    }

    if (cfg.use_memory) {
        for (const auto& [user_id, mem] : state.memories) {
            save_memory(mem, ws.memories_dir() / (user_id + ".json"));
        }
    }
    if (!state.error_records.empty()) {
        std::ofstream out(ws.memories_dir() / (run_name + ".errors.jsonl"),
                          std::ios::binary | std::ios::trunc);
        for (const auto& rec : state.error_records) {
            ordered_json j;
            j["session_id"] = rec.turn.session_id;
            j["user_id"] = rec.turn.user_id;
            j["turn_index"] = rec.turn.turn_index;
            j["predicted"] = rec.predicted;
            j["chosen"] = rec.chosen;
            j["truth"] = rec.truth;
            j["note"] = rec.note;
            ordered_json att = ordered_json::array();
            for (const auto& a : rec.attenuated_topics) {
                att.push_back({{"topic", a.topic}, {"old", a.old_weight}, {"new", a.new_weight}});
            }
            j["attenuated_topics"] = std::move(att);
            out << j.dump() << "\n";
        }
    }

    std::size_t challenged = 0, correct = 0;
    for (const auto& r : all_reports) {
        if (r.skipped) continue;
        ++challenged;
        correct += r.correct ? 1 : 0;
    }
    std::cout << "run " << run_name << ": turns=" << all_reports.size()
              << " challenged=" << challenged << " correct=" << correct;
    if (challenged > 0) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), " accuracy=%.2f%%",
                      100.0 * static_cast<double>(correct) / static_cast<double>(challenged));
        std::cout << buf;
    }
    std::cout << " fallbacks=" << fallbacks << " skipped=" << skipped << "\n";
    std::cout << "reports: " << report_path.string() << "\n";
    return 0;
}

int cmd_eval(Workspace& ws, const EvalOptions& opts) {
    if (opts.report_files.empty()) {
        std::cerr << "eval: no report files given\n";
        return 2;
    }
    EmbedderConfig ecfg = opts.embedder;
    if (!ecfg.cache_path) ecfg.cache_path = ws.cache_file();
    Embedder embedder(ecfg, opts.transport);

    TemplateRegistry registry;
    registry.write_builtins(ws.templates_dir());
    registry.load_dir(ws.templates_dir());

    std::unique_ptr<Backend> backend;
    if (opts.judge) backend = make_backend(opts.judge_backend, opts.transport);

    std::vector<EvalReport> rows;
    for (const auto& file : opts.report_files) {
        ws.note_read(file);
        RunArtifacts run;
        try {
            run = load_run_reports(file);
        } catch (const std::exception& e) {
            std::cerr << "eval: " << e.what() << "\n";
            return 2;
        }
        std::vector<TurnScore> scores;
        for (const auto& r : run.reports) {
            if (r.skipped) continue;
            const std::string& truth = r.candidates.candidates[r.candidates.truth_index];
            TurnScore s;
            s.turn = r.turn;
            s.jaccard = jaccard(r.predicted, truth);
            s.semantic = semantic_sim(r.predicted, truth, embedder);
            if (backend) s.judge = judge(r.predicted, truth, *backend, registry);
            scores.push_back(std::move(s));
        }
        if (scores.empty()) {
            std::cerr << "eval: no scored turns in " << file.string() << "\n";
            return 2;
        }
        std::vector<ChallengeReport> live;
        for (const auto& r : run.reports) {
            if (!r.skipped) live.push_back(r);
        }
        EvalReport report = aggregate(live, scores, run.method,
                                      ws.config().value("dataset_label", ""), run.config_hash);
        rows.push_back(report);

        auto stem = file.stem().string();
        {
            std::ofstream out(ws.reports_dir() / (stem + ".eval.json"),
                              std::ios::binary | std::ios::trunc);
            out << eval_report_json(report) << "\n";
        }
        {
            std::ofstream out(ws.reports_dir() / (stem + ".scores.csv"),
                              std::ios::binary | std::ios::trunc);
            out << scores_csv(scores);
        }
    }
    std::cout << format_table(rows);
    return 0;
}

ordered_json report_to_json(const ChallengeReport& r) {
    ordered_json j;
    j["type"] = "report";
    j["session_id"] = r.turn.session_id;
    j["user_id"] = r.turn.user_id;
    j["turn_index"] = r.turn.turn_index;
    j["predicted"] = r.predicted;
    j["candidates"] = r.candidates.candidates;
    j["truth_index"] = r.candidates.truth_index;
    j["chosen_index"] = r.chosen_index;
    j["correct"] = r.correct;
    j["correction"] = correction_name(r.correction);
    j["used_fallback"] = r.used_fallback;
    j["skipped"] = r.skipped;
    if (r.skipped) j["skip_reason"] = r.skip_reason;
    if (r.error_record) {
        ordered_json e;
        e["note"] = r.error_record->note;
        ordered_json att = ordered_json::array();
        for (const auto& a : r.error_record->attenuated_topics) {
            att.push_back({{"topic", a.topic}, {"old", a.old_weight}, {"new", a.new_weight}});
        }
        e["attenuated_topics"] = std::move(att);
        j["error_record"] = std::move(e);
    } else {
        j["error_record"] = nullptr;
    }
    return j;
}

ChallengeReport report_from_json(const json& j) {
    ChallengeReport r;
    r.turn.session_id = j.value("session_id", "");
    r.turn.user_id = j.value("user_id", "");
    r.turn.turn_index = j.value("turn_index", 0);
    r.predicted = j.value("predicted", "");
    r.candidates.candidates = j.value("candidates", std::vector<std::string>{});
    r.candidates.truth_index = j.value("truth_index", 0u);
    r.chosen_index = j.value("chosen_index", -1);
    r.correct = j.value("correct", false);
    r.correction = parse_correction(j.value("correction", "none"));
    r.used_fallback = j.value("used_fallback", false);
    r.skipped = j.value("skipped", false);
    r.skip_reason = j.value("skip_reason", "");
    return r;
}

RunArtifacts load_run_reports(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw SchemaError("cannot open report file " + file.string());
    RunArtifacts run;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw SchemaError(file.string() + " line " + std::to_string(line_no) +
                              ": invalid JSON");
        }
        std::string type = j.value("type", "");
        if (type == "run_meta") {
            run.method = j.value("method", "");
            run.seed = j.value("seed", 0ULL);
            run.config_hash = j.value("config_hash", "");
            if (j.contains("template_hashes")) {
                for (const auto& [k, v] : j["template_hashes"].items()) {
                    run.template_hashes[k] = v.get<std::string>();
                }
            }
        } else if (type == "report") {
            run.reports.push_back(report_from_json(j));
        }
    }
    if (run.reports.empty()) {
        throw SchemaError("report file has no report lines: " + file.string());
    }
    return run;
}

}  // namespace cfqp
