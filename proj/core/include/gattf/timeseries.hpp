#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gattf {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// Per-step availability flags (1 = observed).
using Mask = std::vector<std::uint8_t>;

/// Label of a physical counter, e.g. "A6".
class SensorId {
public:
    SensorId() = default;
    explicit SensorId(std::string label);

    const std::string& str() const noexcept { return label_; }

    auto operator<=>(const SensorId&) const = default;

private:
    std::string label_;
};

/// One sensor's regularly sampled flow (veh/h) with a missing-value mask.
/// Immutable after construction.
class SensorSeries {
public:
    SensorSeries(SensorId id, Timestamp start, std::int64_t step_seconds, std::vector<double> values, Mask observed);

    /// Convenience: every value observed.
    SensorSeries(SensorId id, Timestamp start, std::int64_t step_seconds, std::vector<double> values);

    const SensorId& id() const noexcept { return id_; }
    Timestamp start() const noexcept { return start_; }
    std::int64_t step() const noexcept { return step_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<const double> values() const noexcept { return values_; }
    std::span<const std::uint8_t> observed() const noexcept { return observed_; }
    double value(std::size_t i) const { return values_.at(i); }
    bool is_observed(std::size_t i) const { return observed_.at(i) != 0; }
    Timestamp timestamp(std::size_t i) const noexcept { return start_ + static_cast<std::int64_t>(i) * step_; }
    std::size_t observed_count() const noexcept;

    /// Observed values only, in time order.
    std::vector<double> observed_values() const;

    bool operator==(const SensorSeries&) const = default;

private:
    SensorId id_;
    Timestamp start_ = 0;
    std::int64_t step_ = 0;
    std::vector<double> values_;
    Mask observed_;
};

/// Sub-range [from, to) of a series; start shifts by from * step.
SensorSeries slice(const SensorSeries& series, std::size_t from, std::size_t to);

/// A set of aligned series sharing start, step and length.
class SensorDataset {
public:
    SensorDataset() = default;
    explicit SensorDataset(std::vector<SensorSeries> series);

    std::size_t size() const noexcept { return series_.size(); }
    bool empty() const noexcept { return series_.empty(); }
    std::size_t length() const noexcept { return series_.empty() ? 0 : series_.front().size(); }
    std::int64_t step() const noexcept { return series_.empty() ? 0 : series_.front().step(); }
    Timestamp start() const noexcept { return series_.empty() ? 0 : series_.front().start(); }

    const SensorSeries& operator[](std::size_t i) const { return series_.at(i); }
    const std::vector<SensorSeries>& series() const noexcept { return series_; }

    std::optional<std::size_t> find(const SensorId& id) const;
    std::size_t index_of(const SensorId& id) const;
    std::vector<SensorId> ids() const;

    /// First n steps of every series.
    SensorDataset prefix(std::size_t n) const;

    /// Only the named series, in the given order.
    SensorDataset select(std::span<const SensorId> ids) const;

    bool operator==(const SensorDataset&) const = default;

private:
    std::vector<SensorSeries> series_;
};

/// Cumulative prefix lengths: train is a prefix of validation, which is a
/// prefix of test.
struct SplitSpec {
    std::size_t train_len = 0;
    std::size_t val_len = 0;
    std::size_t test_len = 0;

    void validate(std::size_t series_length) const;
};

struct DatasetSplits {
    SensorDataset train;
    SensorDataset validation;
    SensorDataset test;
};

DatasetSplits split(const SensorDataset& dataset, const SplitSpec& spec);

} // namespace gattf
