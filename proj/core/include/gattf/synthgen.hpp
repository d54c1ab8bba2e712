#pragma once

#include "gattf/timeseries.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace gattf {

enum class SensorRole { source, derived, noise };

std::string to_string(SensorRole role);
SensorRole sensor_role_from_string(const std::string& s);

struct SynthSensor {
    SensorId id;
    SensorRole role = SensorRole::source;
    // Commuter bumps at 08:00 and 17:30, relative to the amplitude (sources).
    double morning_peak = 0.0;
    double evening_peak = 0.0;
    // Sources in the same group share a day-to-day amplitude factor. Empty
    // means the sensor gets a group of its own.
    std::string day_group;
};

struct SynthEdge {
    SensorId from;
    SensorId to;
    std::size_t lag = 1;
    double weight = 1.0;
};

struct SynthNetworkSpec {
    std::vector<SynthSensor> sensors;
    std::vector<SynthEdge> edges;
    double seasonal_amplitude = 1000.0;
    std::size_t seasonal_period = 288;
    double noise_std = 200.0;
    std::size_t length = 5472;
    std::uint64_t seed = 0;

    Timestamp start = 1704067200; // 2024-01-01T00:00:00Z, a Monday
    std::int64_t step_seconds = 300;
    // Source noise is AR(1) with this coefficient and stationary std noise_std.
    double noise_persistence = 0.99;
    // Derived-sensor measurement noise, as a fraction of noise_std.
    double derived_noise_ratio = 0.25;
    // Day factor kappa_d = 1 + day_factor_std (sqrt(c) g_d + sqrt(1 - c) u_d),
    // c = day_factor_common, g shared by every group; floored at 0.2.
    double day_factor_std = 0.0;
    double day_factor_common = 0.3;
    // Mean level of noise sensors, relative to the amplitude.
    double noise_sensor_level = 0.5;
    std::size_t warmup = 600;

    /// Throws ValidationError on a malformed spec.
    void validate() const;

    nlohmann::json to_json() const;
    static SynthNetworkSpec from_json(const nlohmann::json& j);
};

/// Daily base curve in units of the amplitude: sinusoidal floor plus the
/// two commuter bumps. `tod` is the step within the period.
double commuter_profile(double tod, std::size_t period, double morning_peak, double evening_peak);

/// The 14-sensor, three-branch network documented in docs/synthetic_template.md.
SynthNetworkSpec default_template(std::uint64_t seed, double noise_fraction = 0.2);

/// Parent ids of each derived sensor, in edge order.
std::vector<SensorId> parents_of(const SynthNetworkSpec& spec, const SensorId& derived);

SensorDataset generate(const SynthNetworkSpec& spec);

} // namespace gattf
