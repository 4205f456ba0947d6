#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gptdf/error.hpp"
#include "gptdf/kernel.hpp"
#include "gptdf/time_series.hpp"

namespace gptdf {

/// The {sigma_f, sigma_l, sigma_n} triple that summarizes a series' temporal
/// structure. This is the only payload that leaves an edge node.
struct TemporalFeature {
    double sigma_f = 1.0;
    double sigma_l = 1.0;
    double sigma_n = 0.1;

    [[nodiscard]] bool valid() const noexcept {
        return std::isfinite(sigma_f) && std::isfinite(sigma_l) && std::isfinite(sigma_n) && sigma_f > 0.0 &&
               sigma_l > 0.0 && sigma_n >= 0.0;
    }

    friend bool operator==(const TemporalFeature &, const TemporalFeature &) = default;
};

inline void validate(const TemporalFeature &f) {
    if (!f.valid())
        usage_error("invalid temporal feature: sigma_f=" + std::to_string(f.sigma_f) +
                    " sigma_l=" + std::to_string(f.sigma_l) + " sigma_n=" + std::to_string(f.sigma_n));
}

struct PredictiveDistribution {
    double mean = 0.0;
    double variance = 0.0;
};

struct GPModel {
    KernelSpec kernel = Matern52{};
    double noise_std = 0.0;
    double mean = 0.0;  // constant mean function

    static GPModel from_feature(const TemporalFeature &f, KernelKind kind = KernelKind::Matern52) {
        validate(f);
        return GPModel{make_kernel(kind, f.sigma_f, f.sigma_l), f.sigma_n, 0.0};
    }

    [[nodiscard]] TemporalFeature feature() const { return {output_scale(kernel), length_scale(kernel), noise_std}; }
};

inline void validate(const GPModel &model) {
    validate(model.kernel);
    if (!(std::isfinite(model.noise_std) && model.noise_std >= 0.0))
        usage_error("noise_std must be non-negative and finite");
    if (!std::isfinite(model.mean)) usage_error("mean must be finite");
}

/// Counters for numerical safeguards that fired. Callers own the instance.
struct Diagnostics {
    std::size_t variance_clamps = 0;
    std::size_t jitter_escalations = 0;
    std::size_t zero_likelihood_updates = 0;
};

/// Relative diagonal jitter, scaled by trace(V)/n. Starts at `initial` and
/// multiplies by `factor` until `maximum` before giving up.
struct JitterSchedule {
    double initial = 1e-10;
    double factor = 10.0;
    double maximum = 1e-4;
};

/// Cholesky factorization of V + jitter, escalating the jitter on failure.
inline Eigen::LLT<Eigen::MatrixXd> robust_cholesky(const Eigen::MatrixXd &V, const JitterSchedule &jitter = {},
                                                   Diagnostics *diag = nullptr) {
    const auto n = V.rows();
    const double scale = V.trace() / static_cast<double>(n);
    if (!std::isfinite(scale)) numerical_error("covariance not positive definite");
    for (double rel = jitter.initial; rel <= jitter.maximum * (1.0 + 1e-9); rel *= jitter.factor) {
        Eigen::MatrixXd A = V;
        A.diagonal().array() += rel * scale;
        Eigen::LLT<Eigen::MatrixXd> llt(A);
        if (llt.info() == Eigen::Success && (llt.matrixLLT().diagonal().array() > 0.0).all() &&
            llt.matrixLLT().diagonal().allFinite())
            return llt;
        if (diag) ++diag->jitter_escalations;
    }
    numerical_error("covariance not positive definite");
}

struct LikelihoodEvaluation {
    double value = 0.0;
    // d/d(log sigma_f), d/d(log sigma_l), d/d(log sigma_n)
    std::array<double, 3> gradient{};
};

namespace detail {

inline Eigen::VectorXd centered(const GPModel &model, std::span<const double> values) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(values.size()));
    for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = values[static_cast<std::size_t>(i)] - model.mean;
    return r;
}

inline Eigen::MatrixXd noisy_covariance(const GPModel &model, std::span<const double> ts) {
    return build_noisy_covariance(build_covariance(model.kernel, ts, ts), model.noise_std);
}

}  // namespace detail

/// -1/2 r^T V^-1 r - 1/2 log|V| - n/2 log 2pi, with r = y - mu, and optionally its
/// gradient in log-parameter space.
inline LikelihoodEvaluation evaluate_log_marginal_likelihood(const GPModel &model, const TimeSeries &data,
                                                             bool with_gradient, const JitterSchedule &jitter = {},
                                                             Diagnostics *diag = nullptr) {
    if (data.empty()) usage_error("log marginal likelihood needs at least one observation");
    validate(model);
    const auto &ts = data.timestamps();
    const Eigen::MatrixXd V = detail::noisy_covariance(model, ts);
    const auto llt = robust_cholesky(V, jitter, diag);
    const Eigen::VectorXd r = detail::centered(model, data.values());
    const Eigen::VectorXd alpha = llt.solve(r);
    const double n = static_cast<double>(data.size());
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();

    LikelihoodEvaluation out;
    out.value = -0.5 * r.dot(alpha) - 0.5 * log_det - 0.5 * n * std::log(2.0 * std::numbers::pi);
    if (!with_gradient) return out;

    // dL/dtheta = 1/2 tr((alpha alpha^T - V^-1) dV/dtheta)
    const auto size = V.rows();
    Eigen::MatrixXd W = llt.solve(Eigen::MatrixXd::Identity(size, size));
    W = alpha * alpha.transpose() - W;
    double g_scale = 0.0;
    double g_length = 0.0;
    for (Eigen::Index i = 0; i < size; ++i) {
        for (Eigen::Index j = 0; j < size; ++j) {
            const auto dk = eval_kernel_log_gradient(model.kernel, ts[static_cast<std::size_t>(i)],
                                                     ts[static_cast<std::size_t>(j)]);
            g_scale += W(i, j) * dk[0];
            g_length += W(i, j) * dk[1];
        }
    }
    const double noise_var = model.noise_std * model.noise_std;
    out.gradient = {0.5 * g_scale, 0.5 * g_length, noise_var * W.trace()};
    return out;
}

inline double log_marginal_likelihood(const GPModel &model, const TimeSeries &data, const JitterSchedule &jitter = {},
                                      Diagnostics *diag = nullptr) {
    return evaluate_log_marginal_likelihood(model, data, false, jitter, diag).value;
}

/// Posterior predictive of the latent function at t_star. An empty training
/// set gives the prior (mu, k(t*, t*)).
inline PredictiveDistribution predict(const GPModel &model, std::span<const double> train_t,
                                      std::span<const double> train_y, double t_star,
                                      const JitterSchedule &jitter = {}, Diagnostics *diag = nullptr) {
    validate(model);
    if (train_t.size() != train_y.size()) usage_error("training times and values differ in length");
    const double prior_var = eval_kernel(model.kernel, t_star, t_star);
    if (train_t.empty()) return {model.mean, prior_var};

    const auto llt = robust_cholesky(detail::noisy_covariance(model, train_t), jitter, diag);
    const std::array<double, 1> star{t_star};
    const Eigen::VectorXd k_star = build_covariance(model.kernel, train_t, star).col(0);
    const Eigen::VectorXd alpha = llt.solve(detail::centered(model, train_y));
    const Eigen::VectorXd v = llt.matrixL().solve(k_star);

    PredictiveDistribution out{model.mean + k_star.dot(alpha), prior_var - v.squaredNorm()};
    if (out.variance < 0.0) {
        out.variance = 0.0;
        if (diag) ++diag->variance_clamps;
    }
    return out;
}

inline PredictiveDistribution predict(const GPModel &model, const TimeSeries &train, double t_star,
                                      const JitterSchedule &jitter = {}, Diagnostics *diag = nullptr) {
    return predict(model, train.timestamps(), train.values(), t_star, jitter, diag);
}

/// One draw from N(mu 1, K + sigma_n^2 I) at ts. Deterministic for a given seed.
inline std::vector<double> sample_prior(const GPModel &model, std::span<const double> ts, std::uint64_t seed,
                                        const JitterSchedule &jitter = {}) {
    validate(model);
    if (ts.empty()) usage_error("empty input locations");
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (!(ts[i] > ts[i - 1])) usage_error("sample locations must be strictly increasing");

    const auto llt = robust_cholesky(detail::noisy_covariance(model, ts), jitter);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(ts.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
    const Eigen::VectorXd draw = llt.matrixL() * z;

    std::vector<double> out(ts.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = model.mean + draw(static_cast<Eigen::Index>(i));
    return out;
}

}  // namespace gptdf
