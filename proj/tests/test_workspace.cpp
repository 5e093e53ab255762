#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "cfqp/errors.hpp"
#include "cfqp/text.hpp"
#include "cfqp/workspace.hpp"
#include "helpers.hpp"

using namespace cfqp;
using cfqp::testing::TempDir;
using cfqp::testing::read_file;

namespace {

SynthSpec bench_spec() { return SynthSpec{8, 4, 9, 0.1, 5}; }

RunOptions mock_run(RunMethod method, std::uint64_t seed) {
    RunOptions opts;
    opts.method = method;
    opts.seed = seed;
    opts.backend.kind = BackendKind::mock;
    return opts;
}

std::string dir_digest(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::string material;
    for (const auto& f : files) {
        material += f.filename().string() + "\x1f" + read_file(f) + "\x1e";
    }
    return text::sha256_hex(material);
}

}  // namespace

TEST_CASE("workspace creates its layout and default config") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    CHECK(std::filesystem::is_directory(ws.corpus_dir()));
    CHECK(std::filesystem::is_directory(ws.reports_dir()));
    CHECK(std::filesystem::exists(ws.config_file()));
    CHECK(ws.config()["k"] == 3);
}

TEST_CASE("workspace lock blocks a second command") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    CHECK_THROWS_AS(Workspace(tmp.path() / "ws"), ConfigError);
}

TEST_CASE("synth then ingest round-trips the canonical corpus") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    CHECK(cmd_synth(ws, bench_spec()) == 0);
    Corpus c = load_corpus(ws.corpus_dir());
    CHECK(c.users.size() == 8);
    CHECK(c.sessions.size() == 8);

    // Ingest the just-written canonical files into a second workspace.
    Workspace ws2(tmp.path() / "ws2");
    CHECK(cmd_ingest(ws2, ws.corpus_dir(), "canonical") == 0);
    CHECK(read_file(ws2.corpus_dir() / "sessions.jsonl") ==
          read_file(ws.corpus_dir() / "sessions.jsonl"));
}

TEST_CASE("ingest failures cite the offending line") {
    TempDir tmp;
    tmp.write_file("bad/profiles.jsonl", R"({"user_id": "u1", "static_profile": ""})"
                                         "\n");
    tmp.write_file("bad/sessions.jsonl",
                   R"({"session_id": "s1", "user_id": "u1", "turns": [)"
                   R"({"speaker": "user", "text": "a"}, {"speaker": "system", "text": "b"}]})"
                   "\n"
                   R"({"session_id": "s2", "user_id": "u1", "turns": [)"
                   R"({"speaker": "user", "text": "a"}, {"speaker": "system", "text": "b"}]})"
                   "\n"
                   "{not json}\n");
    Workspace ws(tmp.path() / "ws");
    CHECK_THROWS_WITH_AS(cmd_ingest(ws, tmp.path() / "bad", "canonical"),
                         doctest::Contains("line 3"), SchemaError);
    CHECK(cmd_ingest(ws, tmp.path() / "nowhere", "unknown-format") != 0);
}

TEST_CASE("build is idempotent under the hash provider") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    REQUIRE(cmd_synth(ws, bench_spec()) == 0);
    EmbedderConfig ecfg;
    ecfg.dim = 128;
    REQUIRE(cmd_build(ws, ecfg) == 0);
    std::string first = text::sha256_hex(read_file(ws.matrix_file()));
    REQUIRE(cmd_build(ws, ecfg) == 0);
    CHECK(text::sha256_hex(read_file(ws.matrix_file())) == first);

    SimilarityMatrix m = SimilarityMatrix::load(ws.matrix_file());
    CHECK(m.size() == 8);

    // Spot entry equals a manual recomputation from the documents.
    Corpus c = load_corpus(ws.corpus_dir());
    Embedder embedder(ecfg);
    auto d0 = build_document(c.users[0], c.sessions_of(c.users[0].user_id));
    auto d1 = build_document(c.users[1], c.sessions_of(c.users[1].user_id));
    CHECK(m.at(0, 1) == cosine(embedder.embed(d0.text), embedder.embed(d1.text)));
}

TEST_CASE("run twice with the same seed writes identical reports") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    REQUIRE(cmd_synth(ws, bench_spec()) == 0);
    REQUIRE(cmd_build(ws, EmbedderConfig{}) == 0);
    REQUIRE(cmd_run(ws, mock_run(RunMethod::cfqp, 11)) == 0);
    auto report = ws.reports_dir() / "cfqp-seed11.jsonl";
    REQUIRE(std::filesystem::exists(report));
    std::string first = read_file(report);
    REQUIRE(cmd_run(ws, mock_run(RunMethod::cfqp, 11)) == 0);
    CHECK(read_file(report) == first);

    RunArtifacts run = load_run_reports(report);
    CHECK(run.method == "cfqp");
    CHECK(run.seed == 11);
    CHECK(!run.config_hash.empty());
    CHECK(run.template_hashes.size() == 4);
    CHECK(!run.reports.empty());
}

TEST_CASE("baseline runs never read the matrix") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    REQUIRE(cmd_synth(ws, bench_spec()) == 0);
    REQUIRE(cmd_build(ws, EmbedderConfig{}) == 0);
    {
        Workspace fresh(tmp.path() / "ws2");
        REQUIRE(cmd_synth(fresh, bench_spec()) == 0);
        REQUIRE(cmd_run(fresh, mock_run(RunMethod::baseline, 4)) == 0);
        for (const auto& read : fresh.reads()) {
            CHECK(read.find("matrix.json") == std::string::npos);
        }
    }
}

TEST_CASE("run requires a matrix for collaborative methods") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    REQUIRE(cmd_synth(ws, bench_spec()) == 0);
    CHECK(cmd_run(ws, mock_run(RunMethod::cfqp, 1)) != 0);  // no matrix yet
    CHECK(cmd_run(ws, mock_run(RunMethod::baseline, 1)) == 0);
}

TEST_CASE("eval writes table, json and csv; judge off renders '-'") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    REQUIRE(cmd_synth(ws, bench_spec()) == 0);
    REQUIRE(cmd_build(ws, EmbedderConfig{}) == 0);
    REQUIRE(cmd_run(ws, mock_run(RunMethod::cfqp, 2)) == 0);

    EvalOptions opts;
    opts.report_files = {ws.reports_dir() / "cfqp-seed2.jsonl"};
    opts.judge = false;
    REQUIRE(cmd_eval(ws, opts) == 0);

    auto eval_json = ws.reports_dir() / "cfqp-seed2.eval.json";
    auto csv = ws.reports_dir() / "cfqp-seed2.scores.csv";
    REQUIRE(std::filesystem::exists(eval_json));
    REQUIRE(std::filesystem::exists(csv));
    CHECK(text::contains(read_file(eval_json), "\"mean_judge\": null"));
    CHECK(text::contains(read_file(csv), "session_id"));

    // Means recomputed from the raw JSONL match the eval output.
    RunArtifacts run = load_run_reports(opts.report_files[0]);
    EmbedderConfig ecfg;
    Embedder embedder(ecfg);
    double jsum = 0.0;
    std::size_t n = 0;
    for (const auto& r : run.reports) {
        if (r.skipped) continue;
        jsum += jaccard(r.predicted, r.candidates.candidates[r.candidates.truth_index]);
        ++n;
    }
    nlohmann::json parsed = nlohmann::json::parse(read_file(eval_json));
    CHECK(parsed["mean_jaccard"].get<double>() == doctest::Approx(jsum / n).epsilon(1e-9));
    CHECK(parsed["n_turns"] == n);

    EvalOptions empty;
    CHECK(cmd_eval(ws, empty) != 0);
}

TEST_CASE("eval with the mock judge fills the judge column") {
    TempDir tmp;
    Workspace ws(tmp.path() / "ws");
    REQUIRE(cmd_synth(ws, bench_spec()) == 0);
    REQUIRE(cmd_build(ws, EmbedderConfig{}) == 0);
    REQUIRE(cmd_run(ws, mock_run(RunMethod::cfqp, 2)) == 0);
    EvalOptions opts;
    opts.report_files = {ws.reports_dir() / "cfqp-seed2.jsonl"};
    opts.judge = true;
    opts.judge_backend.kind = BackendKind::mock;
    REQUIRE(cmd_eval(ws, opts) == 0);
    nlohmann::json parsed =
        nlohmann::json::parse(read_file(ws.reports_dir() / "cfqp-seed2.eval.json"));
    CHECK(parsed["mean_judge"].is_number());
    CHECK(parsed["n_judged"] == parsed["n_turns"]);
}

TEST_CASE("end-to-end determinism: two pipelines, byte-identical reports trees") {
    TempDir tmp;
    auto pipeline = [&tmp](const std::string& name) {
        Workspace ws(tmp.path() / name);
        REQUIRE(cmd_synth(ws, bench_spec()) == 0);
        REQUIRE(cmd_build(ws, EmbedderConfig{}) == 0);
        REQUIRE(cmd_run(ws, mock_run(RunMethod::cfqp, 42)) == 0);
        REQUIRE(cmd_run(ws, mock_run(RunMethod::baseline, 42)) == 0);
        EvalOptions opts;
        opts.report_files = {ws.reports_dir() / "cfqp-seed42.jsonl",
                             ws.reports_dir() / "baseline-seed42.jsonl"};
        REQUIRE(cmd_eval(ws, opts) == 0);
        return dir_digest(ws.reports_dir());
    };
    CHECK(pipeline("a") == pipeline("b"));
}

TEST_CASE("method names round-trip") {
    for (RunMethod m : {RunMethod::cfqp, RunMethod::baseline, RunMethod::noc, RunMethod::nom,
                        RunMethod::nos}) {
        auto parsed = parse_method(method_name(m));
        REQUIRE(parsed.has_value());
        CHECK(*parsed == m);
    }
    CHECK(!parse_method("bogus").has_value());
}

#ifdef CFQP_BIN
TEST_CASE("CLI binary: exit codes and validation summary") {
    TempDir tmp;
    auto ws = tmp.path() / "ws";
    std::string bin = CFQP_BIN;
    auto run = [&](const std::string& args) {
        std::string cmd = bin + " " + args + " > " + (tmp.path() / "out.txt").string() + " 2>&1";
        return std::system(cmd.c_str());
    };
    CHECK(run("-w " + ws.string() +
              " synth --users 6 --topics 3 --turns 9 --drift 0 --seed 3") == 0);
    std::string out = read_file(tmp.path() / "out.txt");
    CHECK(text::contains(out, "users=6"));
    CHECK(run("-w " + ws.string() + " build") == 0);
    CHECK(run("-w " + ws.string() + " run --method cfqp --seed 3") == 0);
    CHECK(run("-w " + ws.string() + " eval --reports " +
              (ws / "reports" / "cfqp-seed3.jsonl").string()) == 0);
    out = read_file(tmp.path() / "out.txt");
    CHECK(text::contains(out, "Jaccard"));
    // Validation failure -> nonzero exit citing the line.
    tmp.write_file("bad/profiles.jsonl", "{broken\n");
    tmp.write_file("bad/sessions.jsonl", "");
    CHECK(run("-w " + ws.string() + " ingest --source " + (tmp.path() / "bad").string() +
              " --format canonical") != 0);
    out = read_file(tmp.path() / "out.txt");
    CHECK(text::contains(out, "line 1"));
}
#endif
