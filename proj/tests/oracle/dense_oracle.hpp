#pragma once

// Reference GP computations for tests. Plain nested vectors, Gauss-Jordan
// inversion and LU determinants; shares no code with the library.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline double matern52(double sf, double sl, double a, double b) {
    const double r = std::fabs(a - b);
    const double x = std::sqrt(5.0) * r / sl;
    return sf * sf * (1.0 + x + 5.0 * r * r / (3.0 * sl * sl)) * std::exp(-x);
}

inline double squared_exponential(double h, double lambda, double a, double b) {
    return h * h * std::exp(-std::pow((a - b) / lambda, 2.0));
}

inline Matrix inverse(Matrix a) {
    const std::size_t n = a.size();
    Matrix inv(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[pivot][c])) pivot = r;
        if (a[pivot][c] == 0.0) throw std::runtime_error("singular");
        std::swap(a[c], a[pivot]);
        std::swap(inv[c], inv[pivot]);
        const double d = a[c][c];
        for (std::size_t k = 0; k < n; ++k) {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == c) continue;
            const double f = a[r][c];
            for (std::size_t k = 0; k < n; ++k) {
                a[r][k] -= f * a[c][k];
                inv[r][k] -= f * inv[c][k];
            }
        }
    }
    return inv;
}

inline double log_determinant(Matrix a) {
    const std::size_t n = a.size();
    double log_det = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t pivot = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::fabs(a[r][c]) > std::fabs(a[pivot][c])) pivot = r;
        std::swap(a[c], a[pivot]);
        log_det += std::log(std::fabs(a[c][c]));
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
        }
    }
    return log_det;
}

struct Problem {
    double sigma_f;
    double sigma_l;
    double sigma_n;
    double mean;
    std::vector<double> t;
    std::vector<double> y;
    // Relative diagonal jitter applied by the library before factorizing,
    // scaled by the mean diagonal of V. Part of the model definition.
    double jitter = 1e-10;
};

inline Matrix noisy_covariance(const Problem &p) {
    const std::size_t n = p.t.size();
    Matrix v(n, std::vector<double>(n));
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            v[i][j] = matern52(p.sigma_f, p.sigma_l, p.t[i], p.t[j]) + (i == j ? p.sigma_n * p.sigma_n : 0.0);
            if (i == j) trace += v[i][j];
        }
    for (std::size_t i = 0; i < n; ++i) v[i][i] += p.jitter * trace / static_cast<double>(n);
    return v;
}

inline double log_marginal_likelihood(const Problem &p) {
    const auto v = noisy_covariance(p);
    const auto inv = inverse(v);
    const std::size_t n = p.t.size();
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += (p.y[i] - p.mean) * inv[i][j] * (p.y[j] - p.mean);
    return -0.5 * quad - 0.5 * log_determinant(v) - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

struct Prediction {
    double mean;
    double variance;
};

inline Prediction predict(const Problem &p, double t_star) {
    const std::size_t n = p.t.size();
    const double prior = matern52(p.sigma_f, p.sigma_l, t_star, t_star);
    if (n == 0) return {p.mean, prior};
    const auto inv = inverse(noisy_covariance(p));
    std::vector<double> k(n);
    for (std::size_t i = 0; i < n; ++i) k[i] = matern52(p.sigma_f, p.sigma_l, t_star, p.t[i]);
    double m = p.mean;
    double reduce = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            m += k[i] * inv[i][j] * (p.y[j] - p.mean);
            reduce += k[i] * inv[i][j] * k[j];
        }
    return {m, prior - reduce};
}

}  // namespace oracle
