#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gptdf/error.hpp"
#include "gptdf/gp.hpp"
#include "gptdf/time_series.hpp"

namespace gptdf {

/// splitmix64 finalizer; used to derive independent per-node / per-stream seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct CsvOptions {
    // Column holding the values: a header name, or a 0-based index written as digits.
    std::string column = "0";
    // Optional column of explicit times, same addressing. Must be strictly increasing.
    std::string time_column;
    // Keep the parsed times as timestamps instead of mapping rows to 0..n-1.
    bool use_raw_time = false;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline bool is_index(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline std::string join_rows(const std::vector<std::size_t> &rows) {
    std::string out;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i == 10) {
            out += ", ... (" + std::to_string(rows.size()) + " total)";
            break;
        }
        if (i) out += ", ";
        out += std::to_string(rows[i]);
    }
    return out;
}

}  // namespace detail

/// Reads one numeric column of a comma-separated file. The first line is taken
/// as a header when a column is addressed by name or when its selected field is
/// not numeric. Rows are reported with 1-based line numbers.
inline TimeSeries load_csv(const std::filesystem::path &path, const CsvOptions &opts = {},
                           std::vector<double> *raw_times = nullptr) {
    std::ifstream in(path);
    if (!in) usage_error("cannot open file: " + path.string());

    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(std::move(line));
    while (!lines.empty() && detail::trim(lines.back()).empty()) lines.pop_back();
    if (lines.empty()) data_error("empty series: " + path.string());

    const bool by_name = !detail::is_index(opts.column);
    const bool time_by_name = !opts.time_column.empty() && !detail::is_index(opts.time_column);
    const auto first = detail::split_csv_line(lines.front());

    auto resolve = [&](const std::string &spec, bool named) -> std::size_t {
        if (!named) return std::stoul(spec);
        const auto it = std::find(first.begin(), first.end(), spec);
        if (it == first.end()) usage_error("column '" + spec + "' not found in header of " + path.string());
        return static_cast<std::size_t>(it - first.begin());
    };
    const std::size_t value_col = resolve(opts.column, by_name);
    const bool has_time = !opts.time_column.empty();
    const std::size_t time_col = has_time ? resolve(opts.time_column, time_by_name) : 0;

    bool has_header = by_name || time_by_name;
    if (!has_header) has_header = value_col >= first.size() || !detail::parse_number(first[value_col]);

    std::vector<double> values;
    std::vector<double> times;
    std::vector<std::size_t> bad_rows;
    for (std::size_t i = has_header ? 1 : 0; i < lines.size(); ++i) {
        const auto fields = detail::split_csv_line(lines[i]);
        const auto v = value_col < fields.size() ? detail::parse_number(fields[value_col]) : std::nullopt;
        std::optional<double> t;
        if (has_time && time_col < fields.size()) t = detail::parse_number(fields[time_col]);
        if (!v || (has_time && !t)) {
            bad_rows.push_back(i + 1);
            continue;
        }
        values.push_back(*v);
        if (t) times.push_back(*t);
    }
    if (!bad_rows.empty())
        data_error("unparseable values in " + path.string() + " at rows: " + detail::join_rows(bad_rows));
    if (values.empty()) data_error("empty series: " + path.string());

    if (has_time) {
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                data_error("non-monotone time column in " + path.string() + " at data row " + std::to_string(i + 1));
        if (raw_times) *raw_times = times;
        if (opts.use_raw_time) return TimeSeries(std::move(times), std::move(values));
    }
    return TimeSeries::regular(std::move(values));
}

struct NormalizationStats {
    double mean = 0.0;
    double std = 1.0;

    [[nodiscard]] double apply(double y) const { return (y - mean) / std; }
    [[nodiscard]] double invert(double z) const { return z * std + mean; }
    // Variance of a normalized quantity back in original units.
    [[nodiscard]] double invert_variance(double v) const { return v * std * std; }
};

/// Maps a series to sample mean 0 and sample standard deviation 1 (n-1 denominator).
inline std::pair<TimeSeries, NormalizationStats> normalize(const TimeSeries &data) {
    if (data.size() < 2) data_error("normalization needs at least 2 points");
    const auto &v = data.values();
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0) || sd < 1e-14 * std::abs(mean)) data_error("zero variance");

    NormalizationStats stats{mean, sd};
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = stats.apply(v[i]);
    return {TimeSeries(data.timestamps(), std::move(out)), stats};
}

inline TimeSeries denormalize(const TimeSeries &data, const NormalizationStats &stats) {
    std::vector<double> out(data.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = stats.invert(data.values()[i]);
    return TimeSeries(data.timestamps(), std::move(out));
}

/// Causal normalization for a stream: each value is scaled with the running
/// statistics of the values before it. With fewer than two earlier values the
/// standard deviation is taken as 1.
class RunningNormalizer {
public:
    [[nodiscard]] NormalizationStats current() const {
        if (count_ == 0) return {0.0, 1.0};
        const double sd = count_ >= 2 ? std::sqrt(m2_ / static_cast<double>(count_ - 1)) : 0.0;
        return {mean_, sd > 0.0 ? sd : 1.0};
    }

    /// Normalizes y with the statistics so far, then absorbs it.
    double push(double y) {
        const double z = current().apply(y);
        ++count_;
        const double delta = y - mean_;
        mean_ += delta / static_cast<double>(count_);
        m2_ += delta * (y - mean_);
        return z;
    }

private:
    std::size_t count_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// With `per_step`, also records the statistics each value was scaled with.
inline TimeSeries normalize_online(const TimeSeries &data, std::vector<NormalizationStats> *per_step = nullptr) {
    RunningNormalizer running;
    std::vector<double> out;
    out.reserve(data.size());
    if (per_step) per_step->clear();
    for (double y : data.values()) {
        if (per_step) per_step->push_back(running.current());
        out.push_back(running.push(y));
    }
    return TimeSeries(data.timestamps(), std::move(out));
}

/// Latent draw from a zero-mean GP with the feature's kernel at t = 0..n-1,
/// plus independent N(0, sigma_n^2) observation noise.
inline TimeSeries generate_synthetic(const TemporalFeature &feature, std::size_t n, std::uint64_t seed,
                                     KernelKind kind = KernelKind::Matern52) {
    validate(feature);
    if (n == 0) usage_error("synthetic series length must be positive");
    GPModel latent = GPModel::from_feature(feature, kind);
    latent.noise_std = 0.0;
    std::vector<double> ts(n);
    for (std::size_t i = 0; i < n; ++i) ts[i] = static_cast<double>(i);
    auto values = sample_prior(latent, ts, seed);
    if (feature.sigma_n > 0.0) {
        std::mt19937_64 rng(derive_seed(seed, 0xA5A5));
        std::normal_distribution<double> noise(0.0, feature.sigma_n);
        for (auto &v : values) v += noise(rng);
    }
    return TimeSeries(std::move(ts), std::move(values));
}

}  // namespace gptdf
