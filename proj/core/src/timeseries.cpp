#include "gattf/timeseries.hpp"

#include "gattf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace gattf {

SensorId::SensorId(std::string label) : label_(std::move(label))
{
    if (label_.empty()) {
        throw ValidationError("sensor id must be non-empty");
    }
}

SensorSeries::SensorSeries(SensorId id, Timestamp start, std::int64_t step_seconds, std::vector<double> values,
                           Mask observed)
    : id_(std::move(id)), start_(start), step_(step_seconds), values_(std::move(values)), observed_(std::move(observed))
{
    if (id_.str().empty()) {
        throw ValidationError("sensor id must be non-empty");
    }
    if (step_ <= 0) {
        throw ValidationError("series " + id_.str() + ": step must be positive");
    }
    if (values_.size() != observed_.size()) {
        throw ShapeError("series " + id_.str() + ": " + std::to_string(values_.size()) + " values but " +
                         std::to_string(observed_.size()) + " mask entries");
    }
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (observed_[i] != 0 && !std::isfinite(values_[i])) {
            throw ValidationError("series " + id_.str() + ": non-finite observed value at index " + std::to_string(i));
        }
        observed_[i] = observed_[i] != 0 ? 1 : 0;
    }
}

SensorSeries::SensorSeries(SensorId id, Timestamp start, std::int64_t step_seconds, std::vector<double> values)
    : SensorSeries(std::move(id), start, step_seconds, values, Mask(values.size(), 1))
{
}

std::size_t SensorSeries::observed_count() const noexcept
{
    return static_cast<std::size_t>(std::count(observed_.begin(), observed_.end(), std::uint8_t{1}));
}

std::vector<double> SensorSeries::observed_values() const
{
    std::vector<double> out;
    out.reserve(values_.size());
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (observed_[i]) {
            out.push_back(values_[i]);
        }
    }
    return out;
}

SensorSeries slice(const SensorSeries& series, std::size_t from, std::size_t to)
{
    if (from >= to || to > series.size()) {
        throw RangeError("slice [" + std::to_string(from) + ", " + std::to_string(to) + ") out of range for series " +
                         series.id().str() + " of length " + std::to_string(series.size()));
    }
    auto v = series.values();
    auto m = series.observed();
    return SensorSeries(series.id(), series.timestamp(from), series.step(),
                        std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to)),
                        Mask(m.begin() + static_cast<std::ptrdiff_t>(from), m.begin() + static_cast<std::ptrdiff_t>(to)));
}

SensorDataset::SensorDataset(std::vector<SensorSeries> series) : series_(std::move(series))
{
    if (series_.empty()) {
        throw ValidationError("dataset must contain at least one series");
    }
    std::set<SensorId> seen;
    const auto& first = series_.front();
    for (const auto& s : series_) {
        if (!seen.insert(s.id()).second) {
            throw ValidationError("duplicate sensor id " + s.id().str());
        }
        if (s.start() != first.start() || s.step() != first.step() || s.size() != first.size()) {
            throw ValidationError("series " + s.id().str() + " is not aligned with " + first.id().str());
        }
    }
}

std::optional<std::size_t> SensorDataset::find(const SensorId& id) const
{
    for (std::size_t i = 0; i < series_.size(); ++i) {
        if (series_[i].id() == id) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t SensorDataset::index_of(const SensorId& id) const
{
    if (auto i = find(id)) {
        return *i;
    }
    throw ValidationError("unknown sensor " + id.str());
}

std::vector<SensorId> SensorDataset::ids() const
{
    std::vector<SensorId> out;
    out.reserve(series_.size());
    for (const auto& s : series_) {
        out.push_back(s.id());
    }
    return out;
}

SensorDataset SensorDataset::prefix(std::size_t n) const
{
    std::vector<SensorSeries> out;
    out.reserve(series_.size());
    for (const auto& s : series_) {
        out.push_back(slice(s, 0, n));
    }
    return SensorDataset(std::move(out));
}

SensorDataset SensorDataset::select(std::span<const SensorId> ids) const
{
    std::vector<SensorSeries> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        out.push_back(series_[index_of(id)]);
    }
    return SensorDataset(std::move(out));
}

void SplitSpec::validate(std::size_t series_length) const
{
    if (train_len == 0) {
        throw ValidationError("split: train length must be positive");
    }
    if (train_len > val_len || val_len > test_len) {
        throw ValidationError("split: lengths must be non-decreasing (train <= val <= test)");
    }
    if (test_len > series_length) {
        throw RangeError("split: test length " + std::to_string(test_len) + " exceeds series length " +
                         std::to_string(series_length));
    }
}

DatasetSplits split(const SensorDataset& dataset, const SplitSpec& spec)
{
    spec.validate(dataset.length());
    return {dataset.prefix(spec.train_len), dataset.prefix(spec.val_len), dataset.prefix(spec.test_len)};
}

} // namespace gattf
