#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gptdf/data_io.hpp"
#include "gptdf/edge_sim.hpp"
#include "gptdf/error.hpp"
#include "gptdf/evaluation.hpp"
#include "gptdf/fit.hpp"
#include "gptdf/fusion.hpp"

namespace gptdf {

using nlohmann::json;

inline void to_json(json &j, const TemporalFeature &f) {
    j = {{"sigma_f", f.sigma_f}, {"sigma_l", f.sigma_l}, {"sigma_n", f.sigma_n}};
}

inline void from_json(const json &j, TemporalFeature &f) {
    f = {j.at("sigma_f").get<double>(), j.at("sigma_l").get<double>(), j.at("sigma_n").get<double>()};
}

inline void to_json(json &j, const NormalizationStats &s) { j = {{"mean", s.mean}, {"std", s.std}}; }

inline void from_json(const json &j, NormalizationStats &s) {
    s = {j.at("mean").get<double>(), j.at("std").get<double>()};
}

inline void to_json(json &j, const PredictionRecord &r) {
    j = {{"step", r.step},
         {"t", r.t},
         {"fused_mean", r.mean},
         {"fused_variance", r.variance},
         {"interval_low", r.interval_low},
         {"interval_high", r.interval_high},
         {"predictive_weights", r.predictive_weights}};
}

inline void from_json(const json &j, PredictionRecord &r) {
    r.step = j.at("step").get<std::size_t>();
    r.t = j.at("t").get<double>();
    r.mean = j.at("fused_mean").get<double>();
    r.variance = j.at("fused_variance").get<double>();
    r.interval_low = j.at("interval_low").get<double>();
    r.interval_high = j.at("interval_high").get<double>();
    r.predictive_weights = j.at("predictive_weights").get<std::vector<double>>();
}

inline std::string log_jsonl(const PredictionLog &log) {
    std::string out;
    for (const auto &r : log) out += json(r).dump() + "\n";
    return out;
}

inline json metrics_json(const std::string &method, const Metrics &m) {
    auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
    return {{"method", method}, {"nll", num(m.nll)}, {"mae", num(m.mae)}, {"mse", num(m.mse)}, {"delay", m.delay}};
}

inline json report_json(const BenchmarkReport &report) {
    json rows = json::array();
    for (const auto &row : report.rows) {
        json r = row.error ? json{{"method", row.method}, {"nll", nullptr}, {"mae", nullptr}, {"mse", nullptr},
                                  {"delay", nullptr}}
                           : metrics_json(row.method, row.metrics);
        r["error"] = row.error ? json(*row.error) : json(nullptr);
        rows.push_back(r);
    }
    return rows;
}

namespace detail {

template <class F>
auto with_schema(const std::string &where, F &&f) {
    try {
        return f();
    } catch (const json::exception &e) {
        usage_error(where + ": " + e.what());
    }
}

inline KernelKind parse_kernel(const std::string &s) {
    if (s == "matern52") return KernelKind::Matern52;
    if (s == "squared_exponential") return KernelKind::SquaredExponential;
    usage_error("unknown kernel '" + s + "'");
}

inline Bounds parse_bounds(const json &j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) usage_error("bounds must be [lower, upper]");
    return {v[0], v[1]};
}

inline NormalizationMode parse_normalization(const std::string &s) {
    if (s == "offline") return NormalizationMode::Offline;
    if (s == "online") return NormalizationMode::Online;
    if (s == "none") return NormalizationMode::None;
    usage_error("unknown normalization '" + s + "'");
}

inline std::vector<std::string> parse_model_selector(const json &j) {
    if (j.is_string()) {
        if (j.get<std::string>() != "all") usage_error("model selector must be \"all\" or a list of ids");
        return {};
    }
    auto ids = j.get<std::vector<std::string>>();
    if (ids.empty()) usage_error("explicit model list is empty");
    return ids;
}

}  // namespace detail

inline FitConfig parse_fit_config(const json &j, FitConfig cfg = {}) {
    return detail::with_schema("fit config", [&] {
        if (j.contains("bounds")) {
            const auto &b = j.at("bounds");
            if (b.contains("sigma_f")) cfg.sigma_f = detail::parse_bounds(b.at("sigma_f"));
            if (b.contains("sigma_l")) cfg.sigma_l = detail::parse_bounds(b.at("sigma_l"));
            if (b.contains("sigma_n")) cfg.sigma_n = detail::parse_bounds(b.at("sigma_n"));
        }
        cfg.restarts = j.value("restarts", cfg.restarts);
        cfg.seed = j.value("seed", cfg.seed);
        cfg.max_iterations = j.value("max_iterations", cfg.max_iterations);
        if (j.contains("kernel")) cfg.kernel = detail::parse_kernel(j.at("kernel").get<std::string>());
        if (j.contains("jitter")) {
            const auto &jit = j.at("jitter");
            cfg.jitter.initial = jit.value("initial", cfg.jitter.initial);
            cfg.jitter.factor = jit.value("factor", cfg.jitter.factor);
            cfg.jitter.maximum = jit.value("maximum", cfg.jitter.maximum);
        }
        return cfg;
    });
}

inline FusionConfig parse_fusion_config(const json &j, FusionConfig cfg = {}) {
    return detail::with_schema("fusion config", [&] {
        cfg.alpha = j.value("alpha", cfg.alpha);
        cfg.tau = j.value("tau", cfg.tau);
        cfg.observation_noise = j.value("observation_noise", cfg.observation_noise);
        if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) usage_error("alpha must lie in (0, 1)");
        if (cfg.tau == 0) usage_error("tau must be positive");
        return cfg;
    });
}

/// A stream source: {"id", "csv", "column", "time_column"} or
/// {"id", "synthetic": {"sigma_f", "sigma_l", "sigma_n"}, "n", "seed"}.
/// Relative CSV paths resolve against `base`.
inline StreamSource parse_source(const json &j, const std::filesystem::path &base) {
    return detail::with_schema("stream source", [&] {
        StreamSource src;
        src.id = j.at("id").get<std::string>();
        if (j.contains("csv") == j.contains("synthetic"))
            usage_error("source '" + src.id + "' needs exactly one of \"csv\" or \"synthetic\"");
        if (j.contains("csv")) {
            std::filesystem::path p = j.at("csv").get<std::string>();
            src.csv = p.is_absolute() ? p : base / p;
            if (j.contains("column")) {
                const auto &c = j.at("column");
                src.csv_options.column = c.is_number() ? std::to_string(c.get<std::size_t>()) : c.get<std::string>();
            }
            if (j.contains("time_column")) {
                const auto &c = j.at("time_column");
                src.csv_options.time_column =
                    c.is_number() ? std::to_string(c.get<std::size_t>()) : c.get<std::string>();
            }
        } else {
            src.synthetic = j.at("synthetic").get<TemporalFeature>();
            validate(*src.synthetic);
            src.n = j.at("n").get<std::size_t>();
            if (src.n == 0) usage_error("source '" + src.id + "' has n = 0");
        }
        if (j.contains("seed")) src.seed = j.at("seed").get<std::uint64_t>();
        return src;
    });
}

inline Scenario parse_scenario(const json &j, const std::filesystem::path &base = {}) {
    return detail::with_schema("scenario", [&] {
        Scenario s;
        s.seed = j.value("seed", std::uint64_t{0});
        if (j.contains("fit")) s.fit = parse_fit_config(j.at("fit"));
        s.fusion = parse_fusion_config(j);
        if (j.contains("limit") && !j.at("limit").is_null()) s.limit = j.at("limit").get<std::size_t>();
        if (j.contains("models")) s.model_ids = detail::parse_model_selector(j.at("models"));
        if (j.contains("normalization")) s.normalization = detail::parse_normalization(j.at("normalization").get<std::string>());
        s.method_name = j.value("name", s.method_name);
        s.original_scale = j.value("original_scale", false);
        if (j.contains("registry_store")) s.registry_store = base / j.at("registry_store").get<std::string>();
        for (const auto &h : j.value("historical", json::array())) s.historical.push_back(parse_source(h, base));
        s.target = parse_source(j.at("target"), base);
        return s;
    });
}

inline json read_json_file(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) usage_error("cannot open file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        usage_error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

inline Scenario load_scenario(const std::filesystem::path &path) {
    return parse_scenario(read_json_file(path), path.parent_path());
}

/// Benchmark config: a shared target stream, features given inline and/or
/// fitted from historical sources, and the methods to compare.
inline BenchmarkConfig parse_benchmark(const json &j, const std::filesystem::path &base = {}) {
    return detail::with_schema("benchmark config", [&] {
        BenchmarkConfig cfg;
        const auto seed = j.value("seed", std::uint64_t{0});
        if (j.contains("fit")) cfg.fit = parse_fit_config(j.at("fit"));
        cfg.fit.seed = derive_seed(seed, 0xF17);
        cfg.fusion = parse_fusion_config(j);
        const auto mode = j.contains("normalization") ? detail::parse_normalization(j.at("normalization").get<std::string>())
                                                      : NormalizationMode::Offline;

        for (const auto &f : j.value("features", json::array()))
            cfg.features.push_back({f.at("id").get<std::string>(), f.get<TemporalFeature>()});
        const auto historical = j.value("historical", json::array());
        for (std::size_t i = 0; i < historical.size(); ++i) {
            const auto src = parse_source(historical[i], base);
            const auto raw = load_source(src, derive_seed(seed, i), cfg.fit.kernel);
            FitConfig fit = cfg.fit;
            fit.seed = derive_seed(seed, 1000 + i);
            const auto local = apply_normalization(
                raw, mode == NormalizationMode::None ? NormalizationMode::None : NormalizationMode::Offline);
            cfg.features.push_back({src.id, fit_hyperparameters(local, fit).feature});
        }

        const auto target = parse_source(j.at("target"), base);
        const auto raw_target = load_source(target, derive_seed(seed, historical.size()), cfg.fit.kernel);
        cfg.target = apply_normalization(raw_target, mode, &cfg.target_stats);
        if (j.value("original_scale", false)) cfg.original_target = raw_target;

        for (const auto &m : j.at("methods")) {
            MethodSpec spec;
            spec.name = m.at("name").get<std::string>();
            const auto type = m.at("type").get<std::string>();
            if (type == "gptdf") {
                spec.kind = MethodSpec::Kind::Gptdf;
                if (m.contains("models")) spec.model_ids = detail::parse_model_selector(m.at("models"));
            } else if (type == "gp") {
                spec.kind = MethodSpec::Kind::Gp;
                spec.train_size = m.at("train_size").get<std::size_t>();
            } else {
                usage_error("unknown method type '" + type + "'");
            }
            cfg.methods.push_back(std::move(spec));
        }
        if (cfg.methods.empty()) usage_error("benchmark has no methods");
        return cfg;
    });
}

inline BenchmarkConfig load_benchmark(const std::filesystem::path &path) {
    return parse_benchmark(read_json_file(path), path.parent_path());
}

}  // namespace gptdf
