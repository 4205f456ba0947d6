// gptdf command-line entry point: fit, generate, predict, simulate, bench.
//
// Exit codes: 0 ok, 2 usage/config, 3 data, 4 numerical, 5 partial simulation failure.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gptdf/gptdf.hpp"

namespace fs = std::filesystem;
using gptdf::json;

namespace {

constexpr int kPartialFailure = 5;

struct GlobalFlags {
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::optional<std::size_t> tau;
    std::optional<double> alpha;
    std::optional<std::size_t> limit;
    std::string column;
    std::string out_dir;
    bool original_scale = false;
};

void write_file(const fs::path &path, const std::string &content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) gptdf::usage_error("cannot write " + path.string());
    out << content;
}

std::string sanitize(const std::string &name) {
    std::string out;
    for (char c : name) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
    return out;
}

void apply_fusion_flags(gptdf::FusionConfig &cfg, const GlobalFlags &g) {
    if (g.tau) cfg.tau = *g.tau;
    if (g.alpha) cfg.alpha = *g.alpha;
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) gptdf::usage_error("--alpha must lie in (0, 1)");
    if (cfg.tau == 0) gptdf::usage_error("--tau must be positive");
}

int cmd_fit(const GlobalFlags &g, const std::string &csv, const std::string &time_column, int restarts,
            const std::string &config, const std::string &emit_normalized) {
    gptdf::FitConfig cfg;
    if (!config.empty()) cfg = gptdf::parse_fit_config(gptdf::read_json_file(config));
    if (restarts > 0) cfg.restarts = restarts;
    if (g.seed_set) cfg.seed = g.seed;

    gptdf::CsvOptions opts;
    if (!g.column.empty()) opts.column = g.column;
    opts.time_column = time_column;
    const auto raw = gptdf::load_csv(csv, opts);
    const auto [normalized, stats] = gptdf::normalize(raw);
    if (!emit_normalized.empty())
        write_file(emit_normalized, json{{"stats", stats}, {"timestamps", normalized.timestamps()},
                                         {"values", normalized.values()}}
                                            .dump(2) + "\n");
    const auto result = gptdf::fit_hyperparameters(normalized, cfg);
    if (result.warning) std::cerr << "warning: no restart improved on its initialization\n";
    std::cout << json(result.feature).dump() << "\n";
    return 0;
}

int cmd_generate(const GlobalFlags &g, const gptdf::TemporalFeature &feature, std::size_t n, const std::string &kernel,
                 const std::string &out) {
    const auto kind = kernel == "squared_exponential" ? gptdf::KernelKind::SquaredExponential
                                                      : gptdf::KernelKind::Matern52;
    const auto series = gptdf::generate_synthetic(feature, n, g.seed, kind);
    std::string csv = "t,value\n";
    for (std::size_t i = 0; i < series.size(); ++i)
        csv += gptdf::format_number(series.timestamps()[i]) + "," + gptdf::format_number(series.values()[i]) + "\n";
    if (out.empty())
        std::cout << csv;
    else
        write_file(out, csv);
    return 0;
}

std::vector<gptdf::NamedFeature> read_features(const fs::path &path) {
    std::ifstream in(path);
    if (!in) gptdf::usage_error("cannot open file: " + path.string());
    std::vector<gptdf::NamedFeature> out;
    if (path.extension() == ".jsonl") {
        // A registry store: one report per line.
        for (std::string line; std::getline(in, line);) {
            if (line.empty()) continue;
            const auto decoded = gptdf::wire::decode(line);
            const auto &rec = std::get<gptdf::FeatureRecord>(decoded.message);
            out.push_back({rec.source_id, rec.feature});
        }
        return out;
    }
    const auto j = gptdf::read_json_file(path);
    try {
        for (std::size_t i = 0; i < j.size(); ++i)
            out.push_back({j[i].value("id", "m" + std::to_string(i + 1)), j[i].get<gptdf::TemporalFeature>()});
    } catch (const json::exception &e) {
        gptdf::usage_error("malformed feature list " + path.string() + ": " + e.what());
    }
    return out;
}

int cmd_predict(const GlobalFlags &g, const std::string &csv, const std::string &features_path,
                const std::string &normalization, bool observation_noise) {
    auto features = read_features(features_path);
    if (g.limit && features.size() > *g.limit) features.resize(*g.limit);
    gptdf::FusionConfig fusion;
    fusion.observation_noise = observation_noise;
    apply_fusion_flags(fusion, g);

    gptdf::CsvOptions opts;
    if (!g.column.empty()) opts.column = g.column;
    auto stream = gptdf::load_csv(csv, opts);
    const auto mode = normalization == "online" ? gptdf::NormalizationMode::Online
                      : normalization == "none" ? gptdf::NormalizationMode::None
                                                : gptdf::NormalizationMode::Offline;
    std::vector<gptdf::NormalizationStats> stats;
    const auto raw = stream;
    stream = gptdf::apply_normalization(stream, mode, &stats);

    auto models = gptdf::select_models(features, {}, gptdf::KernelKind::Matern52);
    if (models.empty()) models.push_back(gptdf::GPModel::from_feature(gptdf::kFallbackFeature));
    auto log = gptdf::run_gptdf(std::move(models), stream, fusion).log;
    if (g.original_scale) {
        log = gptdf::to_original_scale(log, stats);
        stream = raw;
    }
    const auto lines = gptdf::log_jsonl(log);
    if (g.out_dir.empty()) {
        std::cout << lines;
    } else {
        fs::create_directories(g.out_dir);
        write_file(fs::path(g.out_dir) / "predictions.jsonl", lines);
    }
    const auto m = gptdf::compute_metrics(log, stream);
    std::cerr << gptdf::metrics_json("GPTDF", m).dump() << "\n";
    return 0;
}

int cmd_simulate(const GlobalFlags &g, const std::string &scenario_path) {
    auto scenario = gptdf::load_scenario(scenario_path);
    if (g.seed_set) scenario.seed = g.seed;
    if (g.limit) scenario.limit = g.limit;
    if (g.original_scale) scenario.original_scale = true;
    apply_fusion_flags(scenario.fusion, g);
    const fs::path out = g.out_dir.empty() ? fs::path("simulation_out") : fs::path(g.out_dir);
    fs::create_directories(out);

    const auto result = gptdf::run_simulation(scenario);
    std::vector<std::string> files;
    auto emit = [&](const std::string &name, const std::string &content) {
        write_file(out / name, content);
        files.push_back(name);
    };

    std::string nodes;
    for (const auto &node : result.nodes) {
        json j{{"node_id", node.node_id},
               {"role", node.role == gptdf::NodeRole::Historical ? "historical" : "target"}};
        if (node.record) {
            j["feature"] = node.record->feature;
            j["n_points"] = node.record->n_points;
            j["fitted_at"] = node.record->fitted_at;
        } else {
            j["models"] = node.model_ids;
            j["used_fallback"] = node.used_fallback;
            j["predictions"] = node.log.size();
            j["variance_clamps"] = node.diagnostics.variance_clamps;
            j["jitter_escalations"] = node.diagnostics.jitter_escalations;
        }
        nodes += j.dump() + "\n";
    }
    emit("nodes.jsonl", nodes);

    std::string registry;
    for (const auto &r : result.registry) registry += gptdf::wire::encode_report(r) + "\n";
    emit("registry.jsonl", registry);

    std::string traffic;
    for (const auto &e : result.traffic)
        traffic += json{{"from", e.from}, {"to", e.to}, {"message", json::parse(e.line)}}.dump() + "\n";
    emit("traffic.jsonl", traffic);

    json bytes{{"query_wire_bytes", result.bytes.query_wire_bytes},
               {"response_payload_bytes", result.bytes.response_payload_bytes},
               {"response_wire_bytes", result.bytes.response_wire_bytes},
               {"reports", json::array()}};
    for (const auto &r : result.bytes.reports)
        bytes["reports"].push_back(
            {{"node_id", r.node_id}, {"payload_bytes", r.payload_bytes}, {"wire_bytes", r.wire_bytes}});
    emit("bytes.json", bytes.dump(2) + "\n");

    if (result.target_completed) {
        const auto log = scenario.original_scale ? gptdf::to_original_scale(result.log, result.target_stats) : result.log;
        const auto &truth = scenario.original_scale ? result.raw_target : result.target;
        emit("predictions.jsonl", gptdf::log_jsonl(log));
        gptdf::BenchmarkReport report;
        report.rows.push_back({scenario.method_name, result.metrics, std::nullopt, {}});
        emit("metrics.csv", gptdf::report_csv(report));
        emit("metrics.json", gptdf::report_json(report).dump(2) + "\n");
        emit("series.csv", gptdf::series_csv(gptdf::to_series(log, truth)));
    }
    if (!result.errors.empty()) {
        std::string errors;
        for (const auto &e : result.errors) errors += e + "\n";
        emit("errors.txt", errors);
    }
    files.push_back("manifest.json");
    write_file(out / "manifest.json", json{{"files", files}, {"seed", scenario.seed}}.dump(2) + "\n");

    std::cout << "nodes: " << result.nodes.size() << ", errors: " << result.errors.size() << ", out: " << out.string()
              << "\n";
    for (const auto &e : result.errors) std::cerr << "error: " << e << "\n";
    if (!result.target_completed) return static_cast<int>(gptdf::ErrorKind::Data);
    return result.errors.empty() ? 0 : kPartialFailure;
}

int cmd_bench(const GlobalFlags &g, const std::string &config_path) {
    auto j = gptdf::read_json_file(config_path);
    if (g.seed_set) j["seed"] = g.seed;
    if (g.tau) j["tau"] = *g.tau;
    if (g.alpha) j["alpha"] = *g.alpha;
    if (g.original_scale) j["original_scale"] = true;
    auto config = gptdf::parse_benchmark(j, fs::path(config_path).parent_path());
    const auto report = gptdf::run_benchmark(config);
    const auto csv = gptdf::report_csv(report);
    std::cout << csv;
    if (!g.out_dir.empty()) {
        const fs::path out = g.out_dir;
        fs::create_directories(out);
        write_file(out / "report.csv", csv);
        write_file(out / "report.json", gptdf::report_json(report).dump(2) + "\n");
        for (const auto &row : report.rows)
            if (!row.error) write_file(out / ("series_" + sanitize(row.method) + ".csv"), gptdf::series_csv(row.series));
    }
    bool any_failed = false;
    for (const auto &row : report.rows)
        if (row.error) {
            any_failed = true;
            std::cerr << "error: " << row.method << ": " << *row.error << "\n";
        }
    return any_failed ? kPartialFailure : 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Gaussian-process temporal data fusion at the edge"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalFlags g;
    auto *seed_opt = app.add_option("--seed", g.seed, "Global RNG seed");
    app.add_option("--tau", g.tau, "Sliding window length");
    app.add_option("--alpha", g.alpha, "Forgetting parameter in (0, 1)");
    app.add_option("--limit", g.limit, "Maximum number of fused models (M)");
    app.add_option("--column", g.column, "CSV value column (name or 0-based index)");
    app.add_option("--out-dir", g.out_dir, "Output directory");
    app.add_flag("--original-scale", g.original_scale, "Report predictions and metrics in original units");

    std::string csv;
    std::string time_column;
    std::string fit_config;
    std::string emit_normalized;
    int restarts = 0;
    auto *fit = app.add_subcommand("fit", "Fit a temporal feature to a CSV series");
    fit->add_option("csv", csv, "Input CSV")->required();
    fit->add_option("--time-column", time_column, "Explicit time column (checked for monotonicity)");
    fit->add_option("--restarts", restarts, "Number of optimizer restarts");
    fit->add_option("--config", fit_config, "Fit config JSON");
    fit->add_option("--emit-normalized", emit_normalized, "Write the normalized series and stats as JSON");

    gptdf::TemporalFeature feature;
    std::size_t n = 200;
    std::string kernel = "matern52";
    std::string out_file;
    auto *gen = app.add_subcommand("generate", "Sample a synthetic series from a GP");
    gen->add_option("--sigma-f", feature.sigma_f, "Output scale")->required();
    gen->add_option("--sigma-l", feature.sigma_l, "Length scale")->required();
    gen->add_option("--sigma-n", feature.sigma_n, "Noise standard deviation")->required();
    gen->add_option("--n", n, "Number of points");
    gen->add_option("--kernel", kernel, "matern52 | squared_exponential");
    gen->add_option("--out", out_file, "Output CSV (default stdout)");

    std::string features_path;
    std::string normalization = "offline";
    bool observation_noise = false;
    auto *pred = app.add_subcommand("predict", "Run online fusion over a CSV stream");
    pred->add_option("csv", csv, "Target stream CSV")->required();
    pred->add_option("--features", features_path, "Feature list (.json) or registry store (.jsonl)")->required();
    pred->add_option("--normalization", normalization, "offline | online | none");
    pred->add_flag("--observation-noise", observation_noise, "Include sigma_n^2 in expert variances");

    std::string scenario;
    auto *sim = app.add_subcommand("simulate", "Run an edge/cloud scenario");
    sim->add_option("scenario", scenario, "Scenario JSON")->required();

    std::string bench_config;
    auto *bench = app.add_subcommand("bench", "Run a benchmark and print the report CSV");
    bench->add_option("config", bench_config, "Benchmark config JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : static_cast<int>(gptdf::ErrorKind::Usage);
    }
    g.seed_set = seed_opt->count() > 0;

    try {
        if (*fit) return cmd_fit(g, csv, time_column, restarts, fit_config, emit_normalized);
        if (*gen) return cmd_generate(g, feature, n, kernel, out_file);
        if (*pred) return cmd_predict(g, csv, features_path, normalization, observation_noise);
        if (*sim) return cmd_simulate(g, scenario);
        if (*bench) return cmd_bench(g, bench_config);
    } catch (const gptdf::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.kind());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
