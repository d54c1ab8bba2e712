#pragma once

#include "gattf/timeseries.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace gattf {

/// "2024-01-01T08:05:00Z" (also accepts "+00:00" or no zone suffix).
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

/// Long-format CSV with header `timestamp,sensor_id,flow`. The grid step is
/// the smallest spacing between distinct timestamps; gaps and empty flows
/// become unobserved steps. Sensors are ordered by id.
SensorDataset read_csv(std::istream& in);
SensorDataset parse_csv(const std::filesystem::path& path);

/// Inverse of read_csv, one row per (step, sensor); unobserved steps are
/// written with an empty flow.
void write_csv(std::ostream& out, const SensorDataset& dataset);
void write_csv(const std::filesystem::path& path, const SensorDataset& dataset);

/// Mean of the observed steps of each `factor`-step bucket. A trailing
/// partial bucket is dropped with a warning.
SensorDataset resample(const SensorDataset& dataset, std::size_t factor);

} // namespace gattf
