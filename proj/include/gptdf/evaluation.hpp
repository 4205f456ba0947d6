#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gptdf/data_io.hpp"
#include "gptdf/error.hpp"
#include "gptdf/fit.hpp"
#include "gptdf/fusion.hpp"
#include "gptdf/gp.hpp"
#include "gptdf/time_series.hpp"

namespace gptdf {

/// One emitted prediction. `step` is the 0-based index of the predicted
/// observation in the stream.
struct PredictionRecord {
    std::size_t step = 0;
    double t = 0.0;
    double mean = 0.0;
    double variance = 0.0;
    double interval_low = 0.0;
    double interval_high = 0.0;
    std::vector<double> predictive_weights;  // empty for single-model baselines
};

using PredictionLog = std::vector<PredictionRecord>;

struct Metrics {
    double nll = 0.0;
    double mae = 0.0;
    double mse = 0.0;
    std::size_t delay = 0;
    std::size_t predictions = 0;
};

/// Mean over steps of -log N(y; m, s^2).
inline double nll(std::span<const PredictiveDistribution> predictions, std::span<const double> truths) {
    if (predictions.size() != truths.size()) usage_error("nll: length mismatch");
    if (predictions.empty()) usage_error("nll: no predictions");
    double total = 0.0;
    for (std::size_t i = 0; i < truths.size(); ++i) total -= gaussian_log_density(predictions[i], truths[i]);
    return total / static_cast<double>(truths.size());
}

inline double mae(std::span<const double> means, std::span<const double> truths) {
    if (means.size() != truths.size()) usage_error("mae: length mismatch");
    if (means.empty()) usage_error("mae: no predictions");
    double total = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) total += std::abs(means[i] - truths[i]);
    return total / static_cast<double>(means.size());
}

inline double mse(std::span<const double> means, std::span<const double> truths) {
    if (means.size() != truths.size()) usage_error("mse: length mismatch");
    if (means.empty()) usage_error("mse: no predictions");
    double total = 0.0;
    for (std::size_t i = 0; i < means.size(); ++i) total += (means[i] - truths[i]) * (means[i] - truths[i]);
    return total / static_cast<double>(means.size());
}

/// Number of leading stream steps without a prediction.
inline std::size_t delay(const PredictionLog &log, std::size_t stream_length) {
    return log.empty() ? stream_length : log.front().step;
}

inline Metrics compute_metrics(const PredictionLog &log, const TimeSeries &stream) {
    Metrics m;
    m.delay = delay(log, stream.size());
    m.predictions = log.size();
    if (log.empty()) {
        m.nll = m.mae = m.mse = std::numeric_limits<double>::quiet_NaN();
        return m;
    }
    std::vector<PredictiveDistribution> preds;
    std::vector<double> means;
    std::vector<double> truths;
    for (const auto &r : log) {
        if (r.step >= stream.size()) usage_error("prediction log refers past the end of the stream");
        preds.push_back({r.mean, r.variance});
        means.push_back(r.mean);
        truths.push_back(stream.values()[r.step]);
    }
    m.nll = nll(preds, truths);
    m.mae = mae(means, truths);
    m.mse = mse(means, truths);
    return m;
}

inline PredictionRecord to_record(std::size_t step, const FusedPrediction &p) {
    return {step, p.t, p.distribution.mean, p.distribution.variance, p.interval_3sigma.low, p.interval_3sigma.high,
            p.predictive_weights};
}

struct GptdfRun {
    PredictionLog log;
    EnsembleState state;
};

/// Runs the online fusion loop over a whole stream. Step 0 is predicted from
/// the fused priors before any data arrives.
inline GptdfRun run_gptdf(std::vector<GPModel> models, const TimeSeries &stream, const FusionConfig &config = {}) {
    if (stream.empty()) usage_error("empty target stream");
    GptdfRun run{{}, make_ensemble(std::move(models), config)};
    run.log.reserve(stream.size());
    run.log.push_back(to_record(0, predict_next(run.state, stream.timestamps()[0])));
    for (std::size_t i = 0; i < stream.size(); ++i) {
        observe(run.state, stream.at(i));
        if (i + 1 < stream.size()) run.log.push_back(to_record(i + 1, predict_next(run.state, stream.timestamps()[i + 1])));
    }
    return run;
}

/// Plain single-model GP conditioned on the `tau` most recent observations.
inline PredictionLog run_windowed_gp(const GPModel &model, const TimeSeries &stream, std::size_t first_step,
                                     std::size_t tau, const JitterSchedule &jitter = {}, Diagnostics *diag = nullptr) {
    if (tau == 0) usage_error("window length must be positive");
    PredictionLog log;
    std::vector<double> ts;
    std::vector<double> ys;
    const std::size_t start = first_step > tau ? first_step - tau : 0;
    for (std::size_t i = start; i < first_step; ++i) {
        ts.push_back(stream.timestamps()[i]);
        ys.push_back(stream.values()[i]);
    }
    for (std::size_t i = first_step; i < stream.size(); ++i) {
        const double t = stream.timestamps()[i];
        const auto pred = predict(model, ts, ys, t, jitter, diag);
        const auto ci = confidence_interval(pred, 3.0);
        log.push_back({i, t, pred.mean, pred.variance, ci.low, ci.high, {}});
        ts.push_back(t);
        ys.push_back(stream.values()[i]);
        if (ts.size() > tau) {
            ts.erase(ts.begin());
            ys.erase(ys.begin());
        }
    }
    return log;
}

struct BaselineRun {
    PredictionLog log;
    Metrics metrics;
    FitResult fit;
};

/// Train-then-predict baseline: fits on the first N points, then predicts the
/// rest with a sliding window. Its delay is N by construction.
inline BaselineRun run_baseline_gp(const TimeSeries &stream, std::size_t train_size, std::size_t tau,
                                   const FitConfig &fit_config = {}) {
    if (train_size < kMinimumFitSize)
        usage_error("baseline training size must be at least " + std::to_string(kMinimumFitSize));
    if (train_size >= stream.size())
        usage_error("baseline training size " + std::to_string(train_size) + " leaves nothing to predict in a " +
                    std::to_string(stream.size()) + "-point stream");
    BaselineRun run;
    run.fit = fit_hyperparameters(stream.slice(0, train_size), fit_config);
    const auto model = GPModel::from_feature(run.fit.feature, fit_config.kernel);
    run.log = run_windowed_gp(model, stream, train_size, tau, fit_config.jitter);
    run.metrics = compute_metrics(run.log, stream);
    return run;
}

struct MethodSpec {
    enum class Kind { Gptdf, Gp };
    std::string name;
    Kind kind = Kind::Gptdf;
    std::vector<std::string> model_ids;  // GPTDF: empty means every feature
    std::size_t train_size = 0;          // GP baseline: N
};

struct NamedFeature {
    std::string id;
    TemporalFeature feature;
};

struct BenchmarkConfig {
    TimeSeries target;  // normalized stream the methods run on
    // Set to score in original units: the raw stream and, per step, the
    // statistics used to normalize it.
    std::optional<TimeSeries> original_target;
    std::vector<NormalizationStats> target_stats;
    std::vector<NamedFeature> features;
    std::vector<MethodSpec> methods;
    FusionConfig fusion{};
    FitConfig fit{};
};

struct SeriesPoint {
    std::size_t step;
    double t;
    double y;
    double mean;
    double variance;
    double low;
    double high;
};

struct BenchmarkRow {
    std::string method;
    Metrics metrics;
    std::optional<std::string> error;
    std::vector<SeriesPoint> series;
};

struct BenchmarkReport {
    std::vector<BenchmarkRow> rows;
};

inline std::vector<GPModel> select_models(const std::vector<NamedFeature> &features,
                                          const std::vector<std::string> &ids, KernelKind kind) {
    std::vector<GPModel> models;
    if (ids.empty()) {
        for (const auto &f : features) models.push_back(GPModel::from_feature(f.feature, kind));
        return models;
    }
    for (const auto &id : ids) {
        const auto it = std::find_if(features.begin(), features.end(), [&](const auto &f) { return f.id == id; });
        if (it == features.end()) usage_error("unknown model id '" + id + "'");
        models.push_back(GPModel::from_feature(it->feature, kind));
    }
    return models;
}

/// Maps predictions back to original units; `per_step[r.step]` holds the
/// statistics that normalized step r.
inline PredictionLog to_original_scale(const PredictionLog &log, std::span<const NormalizationStats> per_step) {
    PredictionLog out = log;
    for (auto &r : out) {
        if (r.step >= per_step.size()) usage_error("no normalization statistics for step " + std::to_string(r.step));
        const auto &s = per_step[r.step];
        r.mean = s.invert(r.mean);
        r.variance = s.invert_variance(r.variance);
        r.interval_low = s.invert(r.interval_low);
        r.interval_high = s.invert(r.interval_high);
    }
    return out;
}

inline std::vector<SeriesPoint> to_series(const PredictionLog &log, const TimeSeries &stream) {
    std::vector<SeriesPoint> out;
    out.reserve(log.size());
    for (const auto &r : log)
        out.push_back({r.step, r.t, stream.values()[r.step], r.mean, r.variance, r.interval_low, r.interval_high});
    return out;
}

/// One row per configured method, in configuration order. A failing method
/// gets its error recorded and does not affect the others.
inline BenchmarkReport run_benchmark(const BenchmarkConfig &config) {
    if (config.methods.empty()) usage_error("benchmark has no methods");
    std::map<std::string, int> seen;
    for (const auto &m : config.methods)
        if (seen[m.name]++) usage_error("duplicate method name '" + m.name + "'");

    BenchmarkReport report;
    for (const auto &method : config.methods) {
        BenchmarkRow row;
        row.method = method.name;
        try {
            PredictionLog log;
            if (method.kind == MethodSpec::Kind::Gptdf) {
                auto models = select_models(config.features, method.model_ids, config.fit.kernel);
                if (models.empty()) usage_error("no features available for " + method.name);
                log = run_gptdf(std::move(models), config.target, config.fusion).log;
            } else {
                log = run_baseline_gp(config.target, method.train_size, config.fusion.tau, config.fit).log;
            }
            if (config.original_target) {
                log = to_original_scale(log, config.target_stats);
                row.metrics = compute_metrics(log, *config.original_target);
                row.series = to_series(log, *config.original_target);
            } else {
                row.metrics = compute_metrics(log, config.target);
                row.series = to_series(log, config.target);
            }
        } catch (const Error &e) {
            row.error = e.what();
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// CSV with columns method,nll,mae,mse,delay. Failed methods have empty
/// metric fields.
inline std::string report_csv(const BenchmarkReport &report) {
    std::string out = "method,nll,mae,mse,delay\n";
    for (const auto &row : report.rows) {
        out += row.method;
        if (row.error) {
            out += ",,,,\n";
            continue;
        }
        out += "," + format_number(row.metrics.nll) + "," + format_number(row.metrics.mae) + "," +
               format_number(row.metrics.mse) + "," + std::to_string(row.metrics.delay) + "\n";
    }
    return out;
}

/// Per-step CSV with columns step,t,y,mean,var,lo,hi.
inline std::string series_csv(const std::vector<SeriesPoint> &series) {
    std::string out = "step,t,y,mean,var,lo,hi\n";
    for (const auto &p : series)
        out += std::to_string(p.step) + "," + format_number(p.t) + "," + format_number(p.y) + "," +
               format_number(p.mean) + "," + format_number(p.variance) + "," + format_number(p.low) + "," +
               format_number(p.high) + "\n";
    return out;
}

}  // namespace gptdf
