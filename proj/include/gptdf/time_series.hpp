#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gptdf/error.hpp"

namespace gptdf {

struct Observation {
    double t = 0.0;
    double y = 0.0;
};

/// Ordered (timestamp, value) pairs. Timestamps strictly increase and all
/// values are finite; both are checked on construction.
class TimeSeries {
public:
    TimeSeries() = default;

    TimeSeries(std::vector<double> timestamps, std::vector<double> values)
        : timestamps_(std::move(timestamps)), values_(std::move(values)) {
        validate();
    }

    /// Series sampled at 0, 1, ..., n-1.
    static TimeSeries regular(std::vector<double> values) {
        std::vector<double> ts(values.size());
        for (std::size_t i = 0; i < ts.size(); ++i) ts[i] = static_cast<double>(i);
        return TimeSeries(std::move(ts), std::move(values));
    }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }
    [[nodiscard]] const std::vector<double> &timestamps() const noexcept { return timestamps_; }
    [[nodiscard]] const std::vector<double> &values() const noexcept { return values_; }
    [[nodiscard]] Observation at(std::size_t i) const { return {timestamps_.at(i), values_.at(i)}; }

    /// Sub-series [first, first + count).
    [[nodiscard]] TimeSeries slice(std::size_t first, std::size_t count) const {
        if (first + count > size()) usage_error("slice out of range");
        return TimeSeries(std::vector<double>(timestamps_.begin() + first, timestamps_.begin() + first + count),
                          std::vector<double>(values_.begin() + first, values_.begin() + first + count));
    }

private:
    void validate() const {
        if (timestamps_.size() != values_.size())
            data_error("time series length mismatch: " + std::to_string(timestamps_.size()) + " timestamps, " +
                       std::to_string(values_.size()) + " values");
        for (std::size_t i = 0; i < values_.size(); ++i) {
            if (!std::isfinite(values_[i]) || !std::isfinite(timestamps_[i]))
                data_error("non-finite entry at index " + std::to_string(i));
            if (i > 0 && !(timestamps_[i] > timestamps_[i - 1]))
                data_error("timestamps not strictly increasing at index " + std::to_string(i));
        }
    }

    std::vector<double> timestamps_;
    std::vector<double> values_;
};

}  // namespace gptdf
