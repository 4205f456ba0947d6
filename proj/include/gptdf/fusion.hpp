#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gptdf/error.hpp"
#include "gptdf/gp.hpp"

namespace gptdf {

inline constexpr double kVarianceFloor = 1e-12;

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
};

inline ConfidenceInterval confidence_interval(const PredictiveDistribution &pred, double k = 3.0) {
    const double half = k * std::sqrt(std::max(pred.variance, 0.0));
    return {pred.mean - half, pred.mean + half};
}

/// omega_hat_j = omega_j^alpha / sum_k omega_k^alpha
inline std::vector<double> predictive_weights(std::span<const double> weights, double alpha) {
    if (weights.empty()) usage_error("no model weights");
    if (!(alpha > 0.0 && alpha < 1.0)) usage_error("forgetting parameter must lie in (0, 1)");
    std::vector<double> out(weights.size());
    // Scale by the largest weight first; the ratio is unchanged and pow stays in range.
    const double top = *std::max_element(weights.begin(), weights.end());
    double total = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
        if (!(weights[j] > 0.0) || !std::isfinite(weights[j])) numerical_error("degenerate weight");
        out[j] = std::pow(weights[j] / top, alpha);
        total += out[j];
    }
    for (auto &w : out) w /= total;
    return out;
}

namespace detail {

inline void floor_and_normalize(std::vector<double> &w) {
    const double floor = 1e-8 / static_cast<double>(w.size());
    double total = 0.0;
    for (auto &v : w) {
        v = std::max(v, floor);
        total += v;
    }
    for (auto &v : w) v /= total;
}

}  // namespace detail

/// Bayesian reweighting from log likelihoods. Subtracting the maximum first
/// keeps the update well defined when every density underflows.
inline std::vector<double> update_weights_log(std::span<const double> omega_hat, std::span<const double> log_likelihoods,
                                              Diagnostics *diag = nullptr) {
    if (omega_hat.size() != log_likelihoods.size()) usage_error("weights and likelihoods differ in length");
    if (omega_hat.empty()) usage_error("no model weights");
    double top = -std::numeric_limits<double>::infinity();
    for (double l : log_likelihoods) {
        if (std::isnan(l) || l == std::numeric_limits<double>::infinity()) usage_error("invalid log likelihood");
        top = std::max(top, l);
    }
    std::vector<double> out(omega_hat.begin(), omega_hat.end());
    if (top == -std::numeric_limits<double>::infinity()) {
        if (diag) ++diag->zero_likelihood_updates;
        return out;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] *= std::exp(log_likelihoods[j] - top);
        total += out[j];
    }
    if (!(total > 0.0)) {
        if (diag) ++diag->zero_likelihood_updates;
        return {omega_hat.begin(), omega_hat.end()};
    }
    for (auto &w : out) w /= total;
    detail::floor_and_normalize(out);
    return out;
}

/// omega_j proportional to omega_hat_j * p(y | M_j), then floored at 1e-8/M and
/// renormalized. All-zero likelihoods leave the weights at omega_hat.
inline std::vector<double> update_weights(std::span<const double> omega_hat, std::span<const double> likelihoods,
                                          Diagnostics *diag = nullptr) {
    std::vector<double> logs(likelihoods.size());
    for (std::size_t j = 0; j < likelihoods.size(); ++j) {
        if (!(likelihoods[j] >= 0.0) || !std::isfinite(likelihoods[j])) usage_error("likelihoods must be non-negative");
        logs[j] = likelihoods[j] > 0.0 ? std::log(likelihoods[j]) : -std::numeric_limits<double>::infinity();
    }
    return update_weights_log(omega_hat, logs, diag);
}

inline double gaussian_log_density(const PredictiveDistribution &pred, double y) {
    const double var = std::max(pred.variance, kVarianceFloor);
    const double d = y - pred.mean;
    return -0.5 * (d * d / var + std::log(2.0 * std::numbers::pi * var));
}

inline double gaussian_predictive_density(const PredictiveDistribution &pred, double y) {
    return std::exp(gaussian_log_density(pred, y));
}

/// Weighted product of Gaussian experts: precision P_j = 1 / var_j,
/// mean = sum(m_j w_j P_j) / sum(w_j P_j), variance = 1 / sum(w_j P_j).
inline PredictiveDistribution fuse(std::span<const PredictiveDistribution> per_model, std::span<const double> omega_hat) {
    if (per_model.size() != omega_hat.size()) usage_error("predictions and weights differ in length");
    if (per_model.empty()) usage_error("nothing to fuse");
    double precision = 0.0;
    double weighted_mean = 0.0;
    for (std::size_t j = 0; j < per_model.size(); ++j) {
        const double p = omega_hat[j] / std::max(per_model[j].variance, kVarianceFloor);
        precision += p;
        weighted_mean += per_model[j].mean * p;
    }
    return {weighted_mean / precision, 1.0 / precision};
}

struct FusedPrediction {
    double t = 0.0;
    PredictiveDistribution distribution;
    std::vector<PredictiveDistribution> per_model;
    std::vector<double> predictive_weights;  // omega_hat used for this fusion
    ConfidenceInterval interval_3sigma;
};

struct FusionConfig {
    double alpha = 0.9;
    std::size_t tau = 50;
    // Add sigma_n^2 to each expert's variance, i.e. predict the noisy
    // observation instead of the latent function.
    bool observation_noise = false;
    JitterSchedule jitter{};
};

/// Mutable state of the online loop over M candidate experts.
struct EnsembleState {
    std::vector<GPModel> models;
    std::vector<double> weights;             // omega, posterior after the last observation
    std::vector<double> predictive_weights;  // omega_hat for the pending prediction
    FusionConfig config;
    std::deque<Observation> window;
    std::size_t step = 0;  // observations absorbed so far
    std::optional<FusedPrediction> pending;
    Diagnostics diagnostics;
};

inline EnsembleState make_ensemble(std::vector<GPModel> models, const FusionConfig &config = {}) {
    if (models.empty()) usage_error("ensemble needs at least one model");
    if (!(config.alpha > 0.0 && config.alpha < 1.0)) usage_error("forgetting parameter must lie in (0, 1)");
    if (config.tau == 0) usage_error("window length must be positive");
    for (const auto &m : models) validate(m);
    EnsembleState state;
    const double uniform = 1.0 / static_cast<double>(models.size());
    state.weights.assign(models.size(), uniform);
    state.predictive_weights = predictive_weights(state.weights, config.alpha);
    state.models = std::move(models);
    state.config = config;
    return state;
}

namespace detail {

inline PredictiveDistribution windowed_prediction(const GPModel &model, const std::deque<Observation> &window,
                                                  double t_next, const FusionConfig &cfg, Diagnostics *diag) {
    std::vector<double> ts;
    std::vector<double> ys;
    ts.reserve(window.size());
    ys.reserve(window.size());
    for (const auto &o : window) {
        ts.push_back(o.t);
        ys.push_back(o.y);
    }
    auto pred = predict(model, ts, ys, t_next, cfg.jitter, diag);
    if (cfg.observation_noise) pred.variance += model.noise_std * model.noise_std;
    return pred;
}

}  // namespace detail

/// Fuses every expert's prediction at t_next from the current window with the
/// current omega_hat and stores it as pending. On an empty window this is the
/// fusion of the priors, which is what lets the first step be predicted.
inline FusedPrediction predict_next(EnsembleState &state, double t_next) {
    if (!state.window.empty() && !(t_next > state.window.back().t))
        usage_error("prediction time must follow the last observation");
    FusedPrediction out;
    out.t = t_next;
    out.per_model.reserve(state.models.size());
    for (const auto &model : state.models)
        out.per_model.push_back(
            detail::windowed_prediction(model, state.window, t_next, state.config, &state.diagnostics));
    out.predictive_weights = state.predictive_weights;
    out.distribution = fuse(out.per_model, out.predictive_weights);
    out.interval_3sigma = confidence_interval(out.distribution, 3.0);
    state.pending = out;
    return out;
}

/// Absorbs an observation: scores it against the pending per-model
/// predictions, applies the Bayesian update, forgets toward uniform and slides
/// the window. Without a pending prediction the weight update is skipped.
inline void observe(EnsembleState &state, const Observation &obs) {
    if (!std::isfinite(obs.y) || !std::isfinite(obs.t)) data_error("non-finite observation");
    if (!state.window.empty() && !(obs.t > state.window.back().t))
        data_error("non-increasing timestamp " + std::to_string(obs.t));
    if (state.pending && state.pending->t == obs.t) {
        std::vector<double> logs(state.models.size());
        for (std::size_t j = 0; j < logs.size(); ++j)
            logs[j] = gaussian_log_density(state.pending->per_model[j], obs.y);
        state.weights = update_weights_log(state.pending->predictive_weights, logs, &state.diagnostics);
        state.predictive_weights = predictive_weights(state.weights, state.config.alpha);
    }
    state.pending.reset();
    state.window.push_back(obs);
    while (state.window.size() > state.config.tau) state.window.pop_front();
    ++state.step;
}

/// One iteration of the online loop: absorb `obs`, then emit the fused
/// prediction for `t_next`.
inline FusedPrediction gptdf_step(EnsembleState &state, const Observation &obs, double t_next) {
    observe(state, obs);
    return predict_next(state, t_next);
}

}  // namespace gptdf
