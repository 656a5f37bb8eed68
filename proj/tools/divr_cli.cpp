// divr: command-line front end.
//
//   divr score [--text T | --file F]        diversity report (stdin by default)
//   divr pipeline build --dataset D --out O  multi-role SFT data
//   divr eval --dataset D [--outputs O]      accuracy/diversity report
//   divr calibrate --ratings R               fit combination weights
//   divr reward serve --port P               HTTP reward service
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "divr/batch.hpp"
#include "divr/calibration.hpp"
#include "divr/dataset.hpp"
#include "divr/error.hpp"
#include "divr/eval.hpp"
#include "divr/gateway.hpp"
#include "divr/pipeline.hpp"
#include "divr/service.hpp"
#include "divr/text_diversity.hpp"

namespace {

struct EndpointFlags {
    std::string base_url;
    std::string model;
    std::string cache_dir;
    int concurrency = 0;
    int retries = -1;

    void add(CLI::App* app) {
        app->add_option("--base-url", base_url, "Endpoint base URL (mock:// for the simulated model)");
        app->add_option("--model", model, "Model id");
        app->add_option("--cache-dir", cache_dir, "Response cache directory");
        app->add_option("--concurrency", concurrency, "Maximum requests in flight")->check(CLI::PositiveNumber);
        app->add_option("--retries", retries, "Retries for transient failures")->check(CLI::NonNegativeNumber);
    }

    divr::EndpointConfig config() const {
        auto c = divr::EndpointConfig::from_env();
        if (!base_url.empty()) c.base_url = base_url;
        if (!model.empty()) c.model_id = model;
        if (!cache_dir.empty()) c.cache_dir = cache_dir;
        if (concurrency > 0) c.concurrency_limit = concurrency;
        if (retries >= 0) c.max_retries = retries;
        return c;
    }
};

std::string read_all(std::istream& in) { return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}; }

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) divr::fail(divr::ErrorKind::IoError, "cannot read " + path);
    return read_all(in);
}

const divr::FunctionWordLexicon& lexicon_for(const std::string& path, std::optional<divr::FunctionWordLexicon>& slot) {
    if (path.empty()) return divr::FunctionWordLexicon::builtin();
    slot = divr::FunctionWordLexicon::load(path);
    return *slot;
}

divr::ScoreServer* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-role reasoning diversity toolkit"};
    app.require_subcommand(1);

    // score
    auto* score = app.add_subcommand("score", "Diversity report for a text");
    std::string text, file, lexicon_path;
    auto* text_opt = score->add_option("--text", text, "Text to score");
    score->add_option("--file", file, "File to score")->excludes(text_opt);
    score->add_option("--lexicon", lexicon_path, "Function-word list (one word per line)");

    // pipeline build
    auto* pipeline = app.add_subcommand("pipeline", "Data construction");
    pipeline->require_subcommand(1);
    auto* build = pipeline->add_subcommand("build", "Build a multi-role SFT dataset");
    std::string dataset, out;
    divr::PipelineOptions popts;
    std::string filter = "self-consistency";
    std::vector<std::size_t> n_range{popts.role_range.min, popts.role_range.max};
    EndpointFlags pflags;
    build->add_option("--dataset", dataset, "Input records (JSONL)")->required();
    build->add_option("--out", out, "Output SFT examples (JSONL)")->required();
    build->add_option("--samples-per-role", popts.samples_per_role, "Paths sampled per role")->check(CLI::PositiveNumber);
    build->add_option("--lambda", popts.lambda, "Role dissimilarity weight");
    build->add_option("--orderings", popts.orderings, "Role orderings per record")->check(CLI::PositiveNumber);
    build->add_option("--filter", filter, "Path filter")
        ->check(CLI::IsMember({"self-consistency", "ground-truth-hinted"}));
    build->add_option("--seed", popts.seed, "Random seed");
    build->add_option("--n-range", n_range, "Generated role count bounds MIN MAX")->expected(2);
    build->add_option("--roles-per-record", popts.roles_per_record, "Roles kept after selection")
        ->check(CLI::Range(2, 64));
    build->add_option("--lower-pct", popts.lower_pct, "Drop outputs below this length percentile")
        ->check(CLI::Range(0.0, 50.0));
    build->add_option("--upper-pct", popts.upper_pct, "Drop outputs above 100 minus this percentile")
        ->check(CLI::Range(0.0, 50.0));
    pflags.add(build);

    // eval
    auto* eval = app.add_subcommand("eval", "Run and score a dataset");
    std::string eval_dataset, outputs_path, out_root = "runs", strategy_name = "regular", scope = "full";
    int waits = 3;
    std::uint64_t eval_seed = 0;
    EndpointFlags eflags;
    eval->add_option("--dataset", eval_dataset, "Records (JSONL)")->required();
    eval->add_option("--outputs", outputs_path, "Existing outputs JSONL ({id, text}); skips generation");
    eval->add_option("--strategy", strategy_name, "Decoding strategy")
        ->check(CLI::IsMember({"zerothink", "lessthink", "regular", "morethink"}));
    eval->add_option("--waits", waits, "Forced continuations for morethink")->check(CLI::NonNegativeNumber);
    eval->add_option("--seed", eval_seed, "Sampling seed");
    eval->add_option("--out-dir", out_root, "Parent directory of the run directory");
    eval->add_option("--scope", scope, "Text scored for diversity")->check(CLI::IsMember({"full", "think_only"}));
    eflags.add(eval);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "Fit combination weights to human ratings");
    std::string ratings;
    double step = divr::kCalibrationStep;
    calibrate->add_option("--ratings", ratings, "Ratings JSONL")->required();
    calibrate->add_option("--step", step, "Grid resolution")->check(CLI::Range(0.01, 1.0));

    // reward serve
    auto* reward = app.add_subcommand("reward", "Reward service");
    reward->require_subcommand(1);
    auto* serve = reward->add_subcommand("serve", "Serve POST /v1/score");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host, "Bind address");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        for (auto& c : msg)
            if (c == '\n') c = ' ';
        std::cerr << "usage error: " << msg << '\n';
        return 2;
    }

    try {
        if (*score) {
            std::optional<divr::FunctionWordLexicon> custom;
            const auto& lexicon = lexicon_for(lexicon_path, custom);
            std::string input;
            if (*text_opt) input = text;
            else if (!file.empty()) input = read_file(file);
            else input = read_all(std::cin);
            std::cout << divr::to_json(divr::score_text(input, lexicon)).dump(2) << '\n';
        } else if (*build) {
            popts.filter = divr::parse_path_filter(filter);
            popts.role_range = {n_range.at(0), n_range.at(1)};
            auto gateway = divr::Gateway::from_config(pflags.config());
            const auto records = divr::load_dataset(dataset);
            const auto result = divr::build_sft_dataset(records, *gateway, popts);
            std::vector<nlohmann::json> rows;
            for (const auto& e : result.examples) rows.push_back(divr::to_json(e));
            divr::write_jsonl(out, rows);
            const auto& s = result.stats;
            std::cerr << "records " << s.records << ", skipped " << s.skipped_records << ", merged "
                      << s.merged_examples << ", kept " << s.kept_examples << ", dropped paths " << s.dropped_paths
                      << '\n';
            for (const auto& [id, why] : s.skip_reasons) std::cerr << "skipped " << id << ": " << why << '\n';
        } else if (*eval) {
            const auto records = divr::load_dataset(eval_dataset);
            auto strategy = divr::DecodeStrategy{};
            strategy.mode = divr::parse_decode_mode(strategy_name);
            if (strategy.mode == divr::DecodeMode::MoreThink) strategy.wait_count = waits;
            strategy.seed = eval_seed;
            std::map<std::string, divr::CompletionResult> outputs;
            if (!outputs_path.empty()) {
                outputs = divr::load_outputs(outputs_path, strategy.open_think, strategy.end_think);
            } else {
                auto gateway = divr::Gateway::from_config(eflags.config());
                outputs = divr::generate_outputs(records, *gateway, strategy);
            }
            divr::EvalOptions options;
            options.scope = divr::parse_diversity_scope(scope);
            options.end_think = strategy.end_think;
            const auto result = divr::evaluate(records, outputs, std::nullopt, options);

            const auto dir = std::filesystem::path(out_root) /
                             divr::run_directory_name(std::chrono::system_clock::now(), eval_seed);
            nlohmann::json extra{{"strategy", std::string(divr::to_string(strategy.mode))},
                                 {"wait_count", strategy.wait_count},
                                 {"seed", eval_seed},
                                 {"diversity_scope", scope}};
            const auto files = divr::emit_report(result, dir, extra);
            std::vector<nlohmann::json> rows;
            for (const auto& r : records) {
                const auto& o = outputs.at(r.id);
                rows.push_back({{"id", r.id}, {"text", o.full_text}, {"injected_continuations", o.injected_continuations}});
            }
            divr::write_jsonl((dir / "outputs.jsonl").string(), rows);
            std::cout << dir.string() << '\n';
        } else if (*calibrate) {
            const auto samples = divr::load_rating_samples(ratings, divr::FunctionWordLexicon::builtin());
            const auto result = divr::calibrate_weights(samples, step);
            nlohmann::json weights;
            const auto w = result.weights.as_array();
            for (std::size_t i = 0; i < w.size(); ++i) weights[std::string(divr::kSubMetricKeys[i])] = w[i];
            std::cout << nlohmann::json{{"weights", weights},
                                        {"correlation", result.correlation},
                                        {"candidates", result.candidates}}
                             .dump(2)
                      << '\n';
        } else if (*serve) {
            divr::ScoreServer server;
            const int bound = server.bind(host, port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << host << ':' << bound << '\n';
            server.listen();
            g_server = nullptr;
        }
    } catch (const divr::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
