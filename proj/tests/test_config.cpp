#include <cmath>
#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "gptdf/config.hpp"
#include "test_support.hpp"

using namespace gptdf;
using nlohmann::json;
using test_support::TempDir;

namespace {

ErrorKind kind_of_failure(const std::function<void()> &f) {
    try {
        f();
    } catch (const Error &e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::Numerical;
}

}  // namespace

TEST(Config, FitConfigFields) {
    const auto cfg = parse_fit_config(json::parse(R"({
        "bounds": {"sigma_f": [0.01, 10], "sigma_n": [0.2, 5]},
        "restarts": 3, "seed": 11, "max_iterations": 40, "kernel": "squared_exponential",
        "jitter": {"initial": 1e-9}
    })"));
    EXPECT_EQ(cfg.sigma_f.lower, 0.01);
    EXPECT_EQ(cfg.sigma_f.upper, 10.0);
    EXPECT_EQ(cfg.sigma_l.lower, 1e-3);
    EXPECT_EQ(cfg.sigma_n.lower, 0.2);
    EXPECT_EQ(cfg.restarts, 3u);
    EXPECT_EQ(cfg.seed, 11u);
    EXPECT_EQ(cfg.max_iterations, 40u);
    EXPECT_EQ(cfg.kernel, KernelKind::SquaredExponential);
    EXPECT_EQ(cfg.jitter.initial, 1e-9);
    EXPECT_EQ(cfg.jitter.maximum, 1e-4);
}

TEST(Config, MalformedFitConfigIsUsageError) {
    EXPECT_EQ(kind_of_failure([] { parse_fit_config(json::parse(R"({"kernel":"rbf"})")); }), ErrorKind::Usage);
    EXPECT_EQ(kind_of_failure([] { parse_fit_config(json::parse(R"({"bounds":{"sigma_f":[1]}})")); }), ErrorKind::Usage);
    EXPECT_EQ(kind_of_failure([] { parse_fit_config(json::parse(R"({"restarts":"many"})")); }), ErrorKind::Usage);
}

TEST(Config, FusionConfigValidation) {
    const auto cfg = parse_fusion_config(json::parse(R"({"alpha":0.8,"tau":20,"observation_noise":true})"));
    EXPECT_EQ(cfg.alpha, 0.8);
    EXPECT_EQ(cfg.tau, 20u);
    EXPECT_TRUE(cfg.observation_noise);
    EXPECT_EQ(kind_of_failure([] { parse_fusion_config(json::parse(R"({"alpha":1.0})")); }), ErrorKind::Usage);
    EXPECT_EQ(kind_of_failure([] { parse_fusion_config(json::parse(R"({"tau":0})")); }), ErrorKind::Usage);
}

TEST(Config, ScenarioParsing) {
    const auto sc = parse_scenario(json::parse(R"({
        "seed": 9, "alpha": 0.85, "tau": 30, "limit": 4, "models": ["edge-1"],
        "normalization": "online", "name": "demo",
        "historical": [
            {"id": "edge-1", "synthetic": {"sigma_f": 0.8, "sigma_l": 2.0, "sigma_n": 0.1}, "n": 100},
            {"id": "edge-2", "csv": "data/e2.csv", "column": "load", "time_column": 0}
        ],
        "target": {"id": "target", "synthetic": {"sigma_f": 0.8, "sigma_l": 2.0, "sigma_n": 0.1}, "n": 50, "seed": 3}
    })"),
                                   "/base");
    EXPECT_EQ(sc.seed, 9u);
    EXPECT_EQ(sc.fusion.alpha, 0.85);
    EXPECT_EQ(sc.fusion.tau, 30u);
    EXPECT_EQ(sc.limit, std::optional<std::size_t>(4));
    EXPECT_EQ(sc.model_ids, std::vector<std::string>{"edge-1"});
    EXPECT_EQ(sc.normalization, NormalizationMode::Online);
    EXPECT_EQ(sc.method_name, "demo");
    ASSERT_EQ(sc.historical.size(), 2u);
    EXPECT_EQ(sc.historical[0].n, 100u);
    EXPECT_EQ(*sc.historical[1].csv, std::filesystem::path("/base/data/e2.csv"));
    EXPECT_EQ(sc.historical[1].csv_options.column, "load");
    EXPECT_EQ(sc.historical[1].csv_options.time_column, std::optional<std::string>("0"));
    EXPECT_EQ(sc.target.seed, std::optional<std::uint64_t>(3));
}

TEST(Config, ScenarioErrors) {
    const auto bad = [](const char *text) {
        return kind_of_failure([&] { parse_scenario(json::parse(text)); });
    };
    EXPECT_EQ(bad(R"({"historical": []})"), ErrorKind::Usage);
    EXPECT_EQ(bad(R"({"target": {"id": "t"}})"), ErrorKind::Usage);
    EXPECT_EQ(bad(R"({"target": {"id": "t", "csv": "a.csv", "synthetic": {"sigma_f":1,"sigma_l":1,"sigma_n":0.1}, "n": 5}})"),
              ErrorKind::Usage);
    EXPECT_EQ(bad(R"({"models": [], "target": {"id": "t", "csv": "a.csv"}})"), ErrorKind::Usage);
    EXPECT_EQ(bad(R"({"normalization": "zscore", "target": {"id": "t", "csv": "a.csv"}})"), ErrorKind::Usage);
}

TEST(Config, LoadScenarioFromDiskReportsBadJson) {
    TempDir dir;
    const auto path = dir.write("bad.json", "{ \"target\": ");
    try {
        load_scenario(path);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::Usage);
        EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
    }
    EXPECT_EQ(kind_of_failure([&] { load_scenario(dir.path() / "missing.json"); }), ErrorKind::Usage);
}

TEST(Config, BenchmarkParsing) {
    const auto cfg = parse_benchmark(json::parse(R"({
        "seed": 1,
        "features": [
            {"id": "M1", "sigma_f": 0.8215, "sigma_l": 2.0752, "sigma_n": 0.1001},
            {"id": "M2", "sigma_f": 0.8069, "sigma_l": 2.4335, "sigma_n": 0.1000}
        ],
        "target": {"id": "target", "synthetic": {"sigma_f": 0.8215, "sigma_l": 2.0752, "sigma_n": 0.1001}, "n": 80},
        "methods": [
            {"name": "GPTDF-All", "type": "gptdf", "models": "all"},
            {"name": "GPTDF-M1", "type": "gptdf", "models": ["M1"]},
            {"name": "GP-50", "type": "gp", "train_size": 50}
        ]
    })"));
    ASSERT_EQ(cfg.features.size(), 2u);
    EXPECT_EQ(cfg.features[0].id, "M1");
    EXPECT_EQ(cfg.features[1].feature, (TemporalFeature{0.8069, 2.4335, 0.1000}));
    EXPECT_EQ(cfg.target.size(), 80u);
    ASSERT_EQ(cfg.methods.size(), 3u);
    EXPECT_TRUE(cfg.methods[0].model_ids.empty());
    EXPECT_EQ(cfg.methods[1].model_ids, std::vector<std::string>{"M1"});
    EXPECT_EQ(cfg.methods[2].kind, MethodSpec::Kind::Gp);
    EXPECT_EQ(cfg.methods[2].train_size, 50u);
}

TEST(Config, BenchmarkErrors) {
    const auto bad = [](const char *text) {
        return kind_of_failure([&] { parse_benchmark(json::parse(text)); });
    };
    const std::string target = R"("target": {"id": "t", "synthetic": {"sigma_f":1,"sigma_l":1,"sigma_n":0.1}, "n": 40})";
    EXPECT_EQ(bad(("{" + target + R"(, "methods": []})").c_str()), ErrorKind::Usage);
    EXPECT_EQ(bad(("{" + target + R"(, "methods": [{"name": "x", "type": "arima"}]})").c_str()), ErrorKind::Usage);
    EXPECT_EQ(bad(("{" + target + R"(, "methods": [{"name": "x", "type": "gp"}]})").c_str()), ErrorKind::Usage);
    EXPECT_EQ(bad(R"({"methods": [{"name": "x", "type": "gptdf"}]})"), ErrorKind::Usage);
}

TEST(Config, FeatureJsonFieldNames) {
    const json j = TemporalFeature{0.5, 2.0, 0.1};
    EXPECT_EQ(j.dump(), R"({"sigma_f":0.5,"sigma_l":2.0,"sigma_n":0.1})");
    EXPECT_EQ(j.get<TemporalFeature>(), (TemporalFeature{0.5, 2.0, 0.1}));
}

TEST(Config, PredictionRecordRoundTrip) {
    PredictionRecord r{3, 4.0, 0.25, 0.5, 0.25 - 3 * std::sqrt(0.5), 0.25 + 3 * std::sqrt(0.5), {0.7, 0.3}};
    const json j = r;
    for (const char *key : {"step", "t", "fused_mean", "fused_variance", "interval_low", "interval_high",
                            "predictive_weights"})
        EXPECT_TRUE(j.contains(key)) << key;
    const auto back = j.get<PredictionRecord>();
    EXPECT_EQ(back.mean, r.mean);
    EXPECT_EQ(back.interval_low, r.interval_low);
    EXPECT_EQ(back.predictive_weights, r.predictive_weights);
}

TEST(Config, MetricsJsonCarriesMethodName) {
    const auto j = metrics_json("GPTDF", Metrics{0.2839, 0.2472, 0.1041, 0, 10});
    EXPECT_EQ(j.at("method"), "GPTDF");
    EXPECT_EQ(j.at("nll").get<double>(), 0.2839);
    EXPECT_EQ(j.at("delay").get<std::size_t>(), 0u);
}
