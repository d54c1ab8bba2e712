#pragma once

#include "gattf/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <span>

namespace gattf {

/// Accuracy of one forecast window for one target.
struct MetricReport {
    SensorId target;
    std::size_t horizon = 0;
    double mase = 0.0;
    double smape = 0.0;
    double mae = 0.0;
    double rmse = 0.0;

    nlohmann::json to_json() const;
};

// All functions below evaluate only positions where mask[i] != 0 and throw
// InsufficientDataError when there are none. An empty mask means "all".

double mae(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask = {});
double rmse(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask = {});

/// Mean of 2|f - a| / (|f| + |a|), a fraction in [0, 2]; 0/0 terms count as 0.
double smape(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask = {});

/// Mean |x[t] - x[t - season]| over pairs where both ends are observed.
/// Throws UndefinedMetricError when it is zero.
double seasonal_naive_scale(const SensorSeries& insample, std::size_t season);

/// MAE divided by the in-sample seasonal-naive MAE.
double mase(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask,
            const SensorSeries& insample, std::size_t season = 288);

MetricReport evaluate_forecast(const SensorId& target, std::span<const double> forecast,
                               std::span<const double> actual, std::span<const std::uint8_t> mask,
                               const SensorSeries& insample, std::size_t season = 288);

} // namespace gattf
