#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gptdf/error.hpp"
#include "gptdf/gp.hpp"
#include "gptdf/time_series.hpp"

namespace gptdf {

struct Bounds {
    double lower = 1e-3;
    double upper = 1e3;
};

struct FitConfig {
    Bounds sigma_f{1e-3, 1e3};
    Bounds sigma_l{1e-3, 1e3};
    Bounds sigma_n{0.1, 1e2};
    int restarts = 8;
    std::uint64_t seed = 0;
    KernelKind kernel = KernelKind::Matern52;
    JitterSchedule jitter{};
    int max_iterations = 200;
    double gradient_tolerance = 1e-7;  // on the projected gradient, log-parameter space
};

inline constexpr std::size_t kMinimumFitSize = 8;

struct RestartTrace {
    TemporalFeature initial;
    TemporalFeature final;
    double initial_objective = -std::numeric_limits<double>::infinity();
    double final_objective = -std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool failed = false;
};

struct FitResult {
    TemporalFeature feature;
    double log_likelihood = -std::numeric_limits<double>::infinity();
    std::size_t best_restart = 0;
    // Set when no restart improved on its initialization; `feature` is then the
    // best initialization.
    bool warning = false;
    std::vector<RestartTrace> restarts;
};

namespace detail {

using LogParams = Eigen::Vector3d;  // log sigma_f, log sigma_l, log sigma_n

struct LogBox {
    LogParams lower;
    LogParams upper;

    [[nodiscard]] LogParams clamp(const LogParams &x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

inline LogBox log_box(const FitConfig &cfg) {
    auto check = [](const Bounds &b, const char *name) {
        if (!(b.lower > 0.0 && b.upper >= b.lower && std::isfinite(b.upper)))
            usage_error(std::string("invalid bounds for ") + name);
    };
    check(cfg.sigma_f, "sigma_f");
    check(cfg.sigma_l, "sigma_l");
    check(cfg.sigma_n, "sigma_n");
    return {{std::log(cfg.sigma_f.lower), std::log(cfg.sigma_l.lower), std::log(cfg.sigma_n.lower)},
            {std::log(cfg.sigma_f.upper), std::log(cfg.sigma_l.upper), std::log(cfg.sigma_n.upper)}};
}

inline TemporalFeature to_feature(const LogParams &x) { return {std::exp(x(0)), std::exp(x(1)), std::exp(x(2))}; }

inline LogParams to_log(const TemporalFeature &f) { return {std::log(f.sigma_f), std::log(f.sigma_l), std::log(f.sigma_n)}; }

/// Negative log marginal likelihood and its gradient; +inf when V is not PD.
struct Objective {
    const TimeSeries &data;
    const FitConfig &cfg;

    bool operator()(const LogParams &x, double &value, LogParams &grad) const { return evaluate(x, value, &grad); }

    /// Value only; skips the O(n^3) inverse the gradient needs.
    bool operator()(const LogParams &x, double &value) const { return evaluate(x, value, nullptr); }

private:
    bool evaluate(const LogParams &x, double &value, LogParams *grad) const {
        try {
            const auto eval = evaluate_log_marginal_likelihood(GPModel::from_feature(to_feature(x), cfg.kernel), data,
                                                               grad != nullptr, cfg.jitter);
            if (!std::isfinite(eval.value)) return false;
            value = -eval.value;
            if (!grad) return true;
            *grad = {-eval.gradient[0], -eval.gradient[1], -eval.gradient[2]};
            return grad->allFinite();
        } catch (const Error &) {
            return false;
        }
    }
};

struct LocalResult {
    LogParams x;
    double value;  // negative log likelihood
    int iterations;
};

/// Projected BFGS on a box. Every accepted step strictly decreases the objective.
inline LocalResult minimize_box(const Objective &f, const LogBox &box, LogParams x, double fx, LogParams g,
                                const FitConfig &cfg) {
    constexpr double kArmijo = 1e-4;
    constexpr double kMaxStep = 2.0;
    constexpr double kEdge = 1e-12;

    Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
    int it = 0;
    for (; it < cfg.max_iterations; ++it) {
        std::array<bool, 3> free{};
        double pg = 0.0;
        for (int i = 0; i < 3; ++i) {
            const bool at_lower = x(i) <= box.lower(i) + kEdge && g(i) > 0.0;
            const bool at_upper = x(i) >= box.upper(i) - kEdge && g(i) < 0.0;
            free[i] = !(at_lower || at_upper);
            if (free[i]) pg = std::max(pg, std::abs(g(i)));
        }
        if (pg < cfg.gradient_tolerance) break;

        // Newton-like step on the free variables only: invert the free block of
        // the Hessian approximation rather than truncating the inverse.
        LogParams d = LogParams::Zero();
        if (free[0] && free[1] && free[2]) {
            d = -H * g;
        } else {
            const Eigen::Matrix3d B = H.inverse();
            std::vector<int> idx;
            for (int i = 0; i < 3; ++i)
                if (free[i]) idx.push_back(i);
            const auto k = static_cast<Eigen::Index>(idx.size());
            Eigen::MatrixXd Bf(k, k);
            Eigen::VectorXd gf(k);
            for (Eigen::Index a = 0; a < k; ++a) {
                gf(a) = g(idx[static_cast<std::size_t>(a)]);
                for (Eigen::Index b = 0; b < k; ++b) Bf(a, b) = B(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
            }
            const Eigen::VectorXd df = -Bf.ldlt().solve(gf);
            for (Eigen::Index a = 0; a < k; ++a) d(idx[static_cast<std::size_t>(a)]) = df(a);
        }
        if (!d.allFinite() || d.dot(g) >= 0.0) {
            H.setIdentity();
            d = -g;
            for (int i = 0; i < 3; ++i)
                if (!free[i]) d(i) = 0.0;
        }
        const double longest = d.cwiseAbs().maxCoeff();
        if (longest > kMaxStep) d *= kMaxStep / longest;

        bool accepted = false;
        LogParams xn;
        LogParams gn;
        double fn = 0.0;
        for (double step = 1.0; step > 1e-12; step *= 0.5) {
            xn = box.clamp(x + step * d);
            if ((xn - x).cwiseAbs().maxCoeff() == 0.0) break;
            if (f(xn, fn) && fn <= fx + kArmijo * g.dot(xn - x) && fn < fx) {
                accepted = true;
                break;
            }
        }
        if (!accepted || !f(xn, fn, gn)) break;

        const LogParams s = xn - x;
        const LogParams y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            if (it == 0) H *= sy / y.squaredNorm();
            const double rho = 1.0 / sy;
            const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
            H = (I - rho * s * y.transpose()) * H * (I - rho * y * s.transpose()) + rho * s * s.transpose();
        }
        const double decrease = fx - fn;
        x = xn;
        fx = fn;
        g = gn;
        if (decrease < 1e-14 * (1.0 + std::abs(fx))) {
            ++it;
            break;
        }
    }
    return {x, fx, it};
}

}  // namespace detail

/// Local maximization of the log marginal likelihood from a given starting
/// feature (clamped into the configured bounds).
inline RestartTrace refine_hyperparameters(const TimeSeries &data, const TemporalFeature &start,
                                           const FitConfig &cfg = {}) {
    const auto box = detail::log_box(cfg);
    const detail::Objective objective{data, cfg};
    RestartTrace trace;
    const detail::LogParams x0 = box.clamp(detail::to_log(start));
    trace.initial = detail::to_feature(x0);
    double f0 = 0.0;
    detail::LogParams g0;
    if (!objective(x0, f0, g0)) {
        trace.failed = true;
        return trace;
    }
    trace.initial_objective = -f0;
    const auto local = detail::minimize_box(objective, box, x0, f0, g0, cfg);
    trace.final = detail::to_feature(local.x);
    trace.final_objective = -local.value;
    trace.iterations = local.iterations;
    return trace;
}

/// Multi-start maximization of the log marginal likelihood over
/// (sigma_f, sigma_l, sigma_n). Initial points are log-uniform over the bounds
/// and drawn up front, so the result does not depend on restart order.
inline FitResult fit_hyperparameters(const TimeSeries &data, const FitConfig &cfg = {}) {
    if (data.size() < kMinimumFitSize)
        data_error("fitting needs at least " + std::to_string(kMinimumFitSize) + " points, got " +
                   std::to_string(data.size()));
    if (cfg.restarts < 1) usage_error("restarts must be at least 1");
    const auto box = detail::log_box(cfg);

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<TemporalFeature> starts;
    for (int r = 0; r < cfg.restarts; ++r) {
        detail::LogParams x;
        for (int i = 0; i < 3; ++i) x(i) = box.lower(i) + unit(rng) * (box.upper(i) - box.lower(i));
        starts.push_back(detail::to_feature(x));
    }

    FitResult result;
    bool any_improved = false;
    double best_init = -std::numeric_limits<double>::infinity();
    TemporalFeature best_init_feature;
    for (std::size_t r = 0; r < starts.size(); ++r) {
        auto trace = refine_hyperparameters(data, starts[r], cfg);
        if (!trace.failed) {
            if (trace.final_objective > trace.initial_objective) any_improved = true;
            if (trace.initial_objective > best_init + 1e-12) {
                best_init = trace.initial_objective;
                best_init_feature = trace.initial;
            }
            if (trace.final_objective > result.log_likelihood + 1e-12) {
                result.log_likelihood = trace.final_objective;
                result.feature = trace.final;
                result.best_restart = r;
            }
        }
        result.restarts.push_back(trace);
    }
    if (!std::isfinite(result.log_likelihood))
        numerical_error("covariance not positive definite at every restart");
    if (!any_improved) {
        result.warning = true;
        result.feature = best_init_feature;
        result.log_likelihood = best_init;
    }
    return result;
}

}  // namespace gptdf
