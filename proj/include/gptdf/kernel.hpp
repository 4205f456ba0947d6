#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "gptdf/error.hpp"

namespace gptdf {

// k(r) = h^2 exp(-(r / lambda)^2)
struct SquaredExponential {
    double output_scale = 1.0;  // h
    double input_scale = 1.0;   // lambda
};

// k(r) = sf^2 (1 + sqrt5 r / l + 5 r^2 / (3 l^2)) exp(-sqrt5 r / l)
struct Matern52 {
    double output_scale = 1.0;  // sigma_f
    double length_scale = 1.0;  // sigma_l
};

using KernelSpec = std::variant<SquaredExponential, Matern52>;

enum class KernelKind { SquaredExponential, Matern52 };

inline KernelSpec make_kernel(KernelKind kind, double output_scale, double length_scale) {
    if (kind == KernelKind::SquaredExponential) return SquaredExponential{output_scale, length_scale};
    return Matern52{output_scale, length_scale};
}

inline KernelKind kind_of(const KernelSpec &kernel) {
    return std::holds_alternative<SquaredExponential>(kernel) ? KernelKind::SquaredExponential
                                                              : KernelKind::Matern52;
}

inline double output_scale(const KernelSpec &kernel) {
    return std::visit([](const auto &k) { return k.output_scale; }, kernel);
}

inline double length_scale(const KernelSpec &kernel) {
    return std::visit(
        [](const auto &k) {
            if constexpr (std::is_same_v<std::decay_t<decltype(k)>, SquaredExponential>)
                return k.input_scale;
            else
                return k.length_scale;
        },
        kernel);
}

inline void validate(const KernelSpec &kernel) {
    const double s = output_scale(kernel);
    const double l = length_scale(kernel);
    if (!(std::isfinite(s) && s > 0.0)) usage_error("kernel output scale must be positive and finite");
    if (!(std::isfinite(l) && l > 0.0)) usage_error("kernel length scale must be positive and finite");
}

inline double eval_kernel(const KernelSpec &kernel, double ti, double tj) {
    const double r = std::abs(ti - tj);
    if (const auto *se = std::get_if<SquaredExponential>(&kernel)) {
        const double u = r / se->input_scale;
        return se->output_scale * se->output_scale * std::exp(-u * u);
    }
    const auto &m = std::get<Matern52>(kernel);
    const double a = std::sqrt(5.0) * r / m.length_scale;
    return m.output_scale * m.output_scale * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

/// Derivatives of k(ti, tj) with respect to (log output scale, log length scale).
inline std::array<double, 2> eval_kernel_log_gradient(const KernelSpec &kernel, double ti, double tj) {
    const double r = std::abs(ti - tj);
    if (const auto *se = std::get_if<SquaredExponential>(&kernel)) {
        const double u = r / se->input_scale;
        const double k = se->output_scale * se->output_scale * std::exp(-u * u);
        return {2.0 * k, 2.0 * u * u * k};
    }
    const auto &m = std::get<Matern52>(kernel);
    const double a = std::sqrt(5.0) * r / m.length_scale;
    const double s2 = m.output_scale * m.output_scale;
    const double e = std::exp(-a);
    return {2.0 * s2 * (1.0 + a + a * a / 3.0) * e, s2 * a * a * (1.0 + a) / 3.0 * e};
}

inline Eigen::MatrixXd build_covariance(const KernelSpec &kernel, std::span<const double> ts_a,
                                        std::span<const double> ts_b) {
    if (ts_a.empty() || ts_b.empty()) usage_error("empty input locations");
    const auto rows = static_cast<Eigen::Index>(ts_a.size());
    const auto cols = static_cast<Eigen::Index>(ts_b.size());
    Eigen::MatrixXd K(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) K(i, j) = eval_kernel(kernel, ts_a[i], ts_b[j]);
    return K;
}

/// V = K + noise_std^2 I.
inline Eigen::MatrixXd build_noisy_covariance(const Eigen::MatrixXd &K, double noise_std) {
    if (K.rows() != K.cols())
        usage_error("covariance must be square, got " + std::to_string(K.rows()) + "x" + std::to_string(K.cols()));
    Eigen::MatrixXd V = K;
    V.diagonal().array() += noise_std * noise_std;
    return V;
}

}  // namespace gptdf
