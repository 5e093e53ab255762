#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfqp/corpus.hpp"
#include "cfqp/embedder.hpp"
#include "cfqp/metrics.hpp"
#include "cfqp/oracle.hpp"
#include "cfqp/reasoner.hpp"

namespace cfqp {

enum class RunMethod { cfqp, baseline, noc, nom, nos };

std::string method_name(RunMethod m);
std::optional<RunMethod> parse_method(const std::string& name);

// All pipeline state lives under one root directory:
//   corpus/           canonical profiles.jsonl + sessions.jsonl
//   embeddings.cache  append-only embedding store
//   matrix.json       user-user similarity snapshot
//   memories/         per-user memory files + error records
//   reports/          replay + eval outputs
//   templates/        prompt templates (builtins written on first use)
//   cfqp.json         workspace config
// A lock file serializes commands on the same workspace.
class Workspace {
public:
    explicit Workspace(std::filesystem::path root);
    ~Workspace();

    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path corpus_dir() const { return root_ / "corpus"; }
    std::filesystem::path cache_file() const { return root_ / "embeddings.cache"; }
    std::filesystem::path matrix_file() const { return root_ / "matrix.json"; }
    std::filesystem::path memories_dir() const { return root_ / "memories"; }
    std::filesystem::path reports_dir() const { return root_ / "reports"; }
    std::filesystem::path templates_dir() const { return root_ / "templates"; }
    std::filesystem::path config_file() const { return root_ / "cfqp.json"; }

    nlohmann::json& config() { return config_; }
    const nlohmann::json& config() const { return config_; }
    void save_config();

    // 16-hex-char hash of a resolved config document.
    static std::string hash_config(const nlohmann::json& resolved);

    // File-read audit trail (used to assert e.g. that baseline runs never
    // touch the matrix).
    void note_read(const std::filesystem::path& p);
    const std::vector<std::string>& reads() const { return reads_; }

private:
    std::filesystem::path root_;
    nlohmann::json config_;
    std::vector<std::string> reads_;
    int lock_fd_ = -1;
};

struct RunOptions {
    RunMethod method = RunMethod::cfqp;
    std::uint64_t seed = 0;
    BackendConfig backend;    // kind/model/endpoint/retries
    std::size_t k = 3, m = 3, h = 6;
    bool log_prompts = false;
    bool llm_extractor_mode = false;  // topic extraction via the backend
    http::PostFn transport;           // test injection; default httplib
};

struct EvalOptions {
    std::vector<std::filesystem::path> report_files;
    bool judge = false;
    BackendConfig judge_backend;
    EmbedderConfig embedder;  // provider for semantic similarity
    http::PostFn transport;
};

// Subcommand bodies; return a process exit code and print human output.
int cmd_ingest(Workspace& ws, const std::filesystem::path& source, const std::string& format);
int cmd_synth(Workspace& ws, const SynthSpec& spec);
int cmd_build(Workspace& ws, const EmbedderConfig& embedder_cfg, http::PostFn transport = {});
int cmd_run(Workspace& ws, const RunOptions& opts);
int cmd_eval(Workspace& ws, const EvalOptions& opts);

// Replay report files: one meta line, then one ChallengeReport per line.
struct RunArtifacts {
    std::string method;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::map<std::string, std::string> template_hashes;
    std::vector<ChallengeReport> reports;
};

nlohmann::ordered_json report_to_json(const ChallengeReport& r);
ChallengeReport report_from_json(const nlohmann::json& j);
RunArtifacts load_run_reports(const std::filesystem::path& file);

}  // namespace cfqp
