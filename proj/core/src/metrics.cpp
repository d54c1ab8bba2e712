#include "gattf/metrics.hpp"

#include "gattf/errors.hpp"

#include <cmath>

namespace gattf {

namespace {

void check(std::span<const double> f, std::span<const double> a, std::span<const std::uint8_t> mask)
{
    if (f.size() != a.size() || (!mask.empty() && mask.size() != a.size())) {
        throw ShapeError("metric inputs differ in length: forecast " + std::to_string(f.size()) + ", actual " +
                         std::to_string(a.size()) + ", mask " + std::to_string(mask.size()));
    }
}

template <typename Term>
double masked_mean(std::span<const double> f, std::span<const double> a, std::span<const std::uint8_t> mask,
                   Term term)
{
    check(f, a, mask);
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask.empty() && mask[i] == 0) {
            continue;
        }
        sum += term(f[i], a[i]);
        ++n;
    }
    if (n == 0) {
        throw InsufficientDataError("no observed positions to evaluate");
    }
    return sum / static_cast<double>(n);
}

} // namespace

nlohmann::json MetricReport::to_json() const
{
    return {{"target", target.str()}, {"horizon", horizon}, {"mase", mase},
            {"smape", smape},         {"mae", mae},         {"rmse", rmse}};
}

double mae(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask)
{
    return masked_mean(forecast, actual, mask, [](double f, double a) { return std::abs(f - a); });
}

double rmse(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask)
{
    return std::sqrt(masked_mean(forecast, actual, mask, [](double f, double a) { return (f - a) * (f - a); }));
}

double smape(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask)
{
    return masked_mean(forecast, actual, mask, [](double f, double a) {
        const double den = std::abs(f) + std::abs(a);
        return den == 0.0 ? 0.0 : 2.0 * std::abs(f - a) / den;
    });
}

double seasonal_naive_scale(const SensorSeries& insample, std::size_t season)
{
    if (season == 0 || insample.size() <= season) {
        throw InsufficientDataError("in-sample length " + std::to_string(insample.size()) +
                                    " must exceed the season " + std::to_string(season));
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t t = season; t < insample.size(); ++t) {
        if (insample.is_observed(t) && insample.is_observed(t - season)) {
            sum += std::abs(insample.value(t) - insample.value(t - season));
            ++n;
        }
    }
    if (n == 0 || sum == 0.0) {
        throw UndefinedMetricError("seasonal-naive scale of " + insample.id().str() + " is zero; MASE undefined");
    }
    return sum / static_cast<double>(n);
}

double mase(std::span<const double> forecast, std::span<const double> actual, std::span<const std::uint8_t> mask,
            const SensorSeries& insample, std::size_t season)
{
    return mae(forecast, actual, mask) / seasonal_naive_scale(insample, season);
}

MetricReport evaluate_forecast(const SensorId& target, std::span<const double> forecast,
                               std::span<const double> actual, std::span<const std::uint8_t> mask,
                               const SensorSeries& insample, std::size_t season)
{
    MetricReport r;
    r.target = target;
    r.horizon = actual.size();
    r.mae = mae(forecast, actual, mask);
    r.rmse = rmse(forecast, actual, mask);
    r.smape = smape(forecast, actual, mask);
    r.mase = r.mae / seasonal_naive_scale(insample, season);
    return r;
}

} // namespace gattf
