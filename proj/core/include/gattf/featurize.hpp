#pragma once

#include "gattf/mi_select.hpp"
#include "gattf/timeseries.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <vector>

namespace gattf {

inline constexpr std::size_t kTimeFeatureCount = 4;

/// minute/59 - 0.5, hour/23 - 0.5, weekday/6 - 0.5 (Monday = 0), log(1 + position).
std::array<double, kTimeFeatureCount> time_features(Timestamp t, std::size_t position);

/// Recent, daily, two-day and weekly lag neighbourhoods for the sampling
/// step, keeping only lags with lag + context_length <= history_length.
std::vector<std::size_t> default_lags(std::int64_t step_seconds, std::size_t context_length,
                                      std::size_t history_length);

struct FeatureConfig {
    std::size_t context_length = 576;
    std::size_t prediction_length = 288;
    std::vector<std::size_t> lags;
    /// Sensors the model is trained on; their position is the static id.
    std::vector<SensorId> sensors;
    /// Covariate sensors per modelled sensor. Either empty, or one entry per
    /// sensor, all with the same number of covariates.
    std::map<SensorId, std::vector<SensorId>> covariates;

    std::size_t covariate_count() const;
    std::size_t max_lag() const;
    /// Per-position input width before the static embedding:
    /// target slot, lags, time features, covariates, indicators.
    std::size_t feature_width() const;
    void validate() const;
};

enum class InstanceMode { train, validate, forecast };

/// One context + prediction window. Values are raw (veh/h); the network
/// divides them by `scale`. Matrices are row-major with one row per window
/// position (context first, then prediction).
struct TrainingInstance {
    SensorId sensor;
    std::size_t static_id = 0;
    std::size_t start = 0; ///< dataset index of the first context step
    std::size_t context_length = 0;
    std::size_t prediction_length = 0;
    std::size_t num_lags = 0;
    std::size_t num_covariates = 0;

    std::vector<double> target_context;
    std::vector<double> target_future;
    Mask observed_context;
    Mask observed_future;
    /// [(C + P) x L]: value at position - lag. Entries that fall inside the
    /// prediction window are 0 here; the model supplies them.
    std::vector<double> lag_features;
    Mask lag_observed;
    std::vector<double> time_features; ///< [(C + P) x 4]
    std::vector<double> covariate_channels; ///< [(C + P) x K]
    Mask covariate_indicator; ///< [(C + P) x K]
    double scale = 1.0;

    std::size_t window() const noexcept { return context_length + prediction_length; }
};

/// Train mode draws `count` windows (sensor and start uniform, seeded).
/// Validate and forecast modes return the last admissible window of every
/// configured sensor; `count` is ignored.
std::vector<TrainingInstance> make_instances(const SensorDataset& dataset, const FeatureConfig& config,
                                             InstanceMode mode, std::uint64_t seed = 0, std::size_t count = 0);

/// The window of `sensor` starting at `start`.
TrainingInstance make_instance(const SensorDataset& dataset, const FeatureConfig& config, const SensorId& sensor,
                               std::size_t start);

} // namespace gattf
