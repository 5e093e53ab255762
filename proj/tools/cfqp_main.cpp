// cfqp: next-question prediction pipeline CLI.
//
//   cfqp synth  -w ws --users 20 --topics 5 --turns 10 --drift 0.1 --seed 42
//   cfqp ingest -w ws --source corpus_dir --format canonical
//   cfqp build  -w ws
//   cfqp run    -w ws --method cfqp --seed 42
//   cfqp eval   -w ws --reports ws/reports/cfqp-seed42.jsonl [--judge]

#include <CLI11.hpp>

#include <iostream>

#include "cfqp/errors.hpp"
#include "cfqp/workspace.hpp"

namespace {

cfqp::BackendConfig backend_from_flags(const std::string& kind, const std::string& endpoint,
                                       const std::string& model, int max_retries,
                                       double temperature) {
    cfqp::BackendConfig cfg;
    cfg.kind = (kind == "remote") ? cfqp::BackendKind::remote : cfqp::BackendKind::mock;
    cfg.endpoint = endpoint;
    cfg.model_name = model;
    cfg.max_retries = max_retries;
    cfg.temperature = temperature;
    return cfg;
}

cfqp::EmbedderConfig embedder_from_flags(const std::string& provider, std::size_t dim,
                                         const std::string& endpoint) {
    cfqp::EmbedderConfig cfg;
    cfg.provider =
        (provider == "remote") ? cfqp::EmbedProvider::remote : cfqp::EmbedProvider::hash;
    cfg.dim = dim;
    cfg.endpoint = endpoint;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cfqp - collaborative-filtering next-question prediction pipeline"};
    app.require_subcommand(1);

    std::string workspace_path;
    app.add_option("-w,--workspace", workspace_path, "workspace directory")->required();

    // ingest
    auto* ingest = app.add_subcommand("ingest", "validate and import a corpus");
    std::string source, format = "canonical";
    ingest->add_option("--source", source, "corpus source (dir or file)")->required();
    ingest->add_option("--format", format, "canonical|chatjson");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
    cfqp::SynthSpec spec;
    synth->add_option("--users", spec.n_users, "number of users (>=2)");
    synth->add_option("--topics", spec.n_topics, "number of topics (>=2)");
    synth->add_option("--turns", spec.turns_per_session, "utterances per session (>=3)");
    synth->add_option("--drift", spec.drift_rate, "topic drift probability per turn");
    synth->add_option("--seed", spec.seed, "generator seed");

    // build
    auto* build = app.add_subcommand("build", "assemble documents and build the similarity matrix");
    std::string embed_provider = "hash", embed_endpoint;
    std::size_t embed_dim = 768;
    build->add_option("--embed-provider", embed_provider, "hash|remote");
    build->add_option("--dim", embed_dim, "embedding dimension");
    build->add_option("--embed-endpoint", embed_endpoint, "remote embedding endpoint URL");

    // run
    auto* run = app.add_subcommand("run", "replay sessions through the predict-challenge loop");
    std::string method = "cfqp", backend_kind = "mock", backend_endpoint, backend_model = "mock";
    std::uint64_t run_seed = 0;
    std::size_t k = 3, m = 3, h = 6;
    int max_retries = 2;
    double temperature = 0.0;
    bool log_prompts = false, llm_extract = false;
    run->add_option("--method", method, "cfqp|baseline|cfqp-noc|cfqp-nom|cfqp-nos");
    run->add_option("--seed", run_seed, "run seed");
    run->add_option("--backend", backend_kind, "mock|remote");
    run->add_option("--endpoint", backend_endpoint, "remote chat endpoint URL");
    run->add_option("--model", backend_model, "backbone model name");
    run->add_option("--max-retries", max_retries, "chat retry budget");
    run->add_option("--temperature", temperature, "sampling temperature (remote)");
    run->add_option("-k", k, "neighborhood size");
    run->add_option("-m", m, "distractors per candidate set");
    run->add_option("--history", h, "history window in utterances");
    run->add_flag("--log-prompts", log_prompts, "write rendered prompts to reports/");
    run->add_flag("--llm-extract", llm_extract, "extract memory topics via the backend");

    // eval
    auto* eval = app.add_subcommand("eval", "score replay reports");
    std::vector<std::string> report_files;
    bool judge_on = false;
    std::string judge_kind = "mock", judge_endpoint, judge_model = "mock";
    std::string eval_embed_provider = "hash", eval_embed_endpoint;
    std::size_t eval_dim = 768;
    eval->add_option("--reports", report_files, "replay report JSONL files")->required();
    eval->add_flag("--judge", judge_on, "score with the LLM judge");
    eval->add_option("--backend", judge_kind, "judge backend: mock|remote");
    eval->add_option("--endpoint", judge_endpoint, "judge endpoint URL");
    eval->add_option("--model", judge_model, "judge model name");
    eval->add_option("--embed-provider", eval_embed_provider, "hash|remote");
    eval->add_option("--dim", eval_dim, "embedding dimension");
    eval->add_option("--embed-endpoint", eval_embed_endpoint, "remote embedding endpoint URL");

    CLI11_PARSE(app, argc, argv);

    try {
        cfqp::Workspace ws{workspace_path};
        if (*ingest) return cfqp::cmd_ingest(ws, source, format);
        if (*synth) return cfqp::cmd_synth(ws, spec);
        if (*build) {
            return cfqp::cmd_build(ws, embedder_from_flags(embed_provider, embed_dim,
                                                           embed_endpoint));
        }
        if (*run) {
            auto parsed = cfqp::parse_method(method);
            if (!parsed) {
                std::cerr << "unknown method '" << method << "'\n";
                return 2;
            }
            cfqp::RunOptions opts;
            opts.method = *parsed;
            opts.seed = run_seed;
            opts.backend = backend_from_flags(backend_kind, backend_endpoint, backend_model,
                                              max_retries, temperature);
            opts.k = k;
            opts.m = m;
            opts.h = h;
            opts.log_prompts = log_prompts;
            opts.llm_extractor_mode = llm_extract;
            return cfqp::cmd_run(ws, opts);
        }
        if (*eval) {
            cfqp::EvalOptions opts;
            for (const auto& f : report_files) opts.report_files.emplace_back(f);
            opts.judge = judge_on;
            opts.judge_backend =
                backend_from_flags(judge_kind, judge_endpoint, judge_model, 2, 0.0);
            opts.embedder =
                embedder_from_flags(eval_embed_provider, eval_dim, eval_embed_endpoint);
            return cfqp::cmd_eval(ws, opts);
        }
    } catch (const cfqp::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const cfqp::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
