#include "gattf/featurize.hpp"

#include "gattf/errors.hpp"
#include "gattf/log.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

namespace gattf {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

} // namespace

std::array<double, kTimeFeatureCount> time_features(Timestamp t, std::size_t position)
{
    const std::int64_t days = floor_div(t, 86400);
    const std::int64_t sec_of_day = t - days * 86400;
    const auto minute = static_cast<double>(sec_of_day % 3600 / 60);
    const auto hour = static_cast<double>(sec_of_day / 3600);
    // 1970-01-01 was a Thursday.
    const auto weekday = static_cast<double>(((days + 3) % 7 + 7) % 7);
    return {minute / 59.0 - 0.5, hour / 23.0 - 0.5, weekday / 6.0 - 0.5,
            std::log1p(static_cast<double>(position))};
}

std::vector<std::size_t> default_lags(std::int64_t step_seconds, std::size_t context_length,
                                      std::size_t history_length)
{
    if (step_seconds <= 0 || 86400 % step_seconds != 0) {
        throw ValidationError("default lags need a step that divides one day, got " + std::to_string(step_seconds) +
                              " s");
    }
    std::vector<std::size_t> lags;
    if (step_seconds == 86400) {
        lags = {1, 2, 3, 7};
    } else {
        const auto per_day = static_cast<std::size_t>(86400 / step_seconds);
        for (std::size_t l = 1; l <= 7; ++l) {
            lags.push_back(l);
        }
        for (std::size_t days : {std::size_t{1}, std::size_t{2}, std::size_t{7}}) {
            for (std::size_t c : {days * per_day - 1, days * per_day, days * per_day + 1}) {
                lags.push_back(c);
            }
        }
        std::sort(lags.begin(), lags.end());
        lags.erase(std::unique(lags.begin(), lags.end()), lags.end());
    }
    std::vector<std::size_t> kept;
    std::vector<std::size_t> dropped;
    for (std::size_t l : lags) {
        (l + context_length <= history_length ? kept : dropped).push_back(l);
    }
    if (!dropped.empty()) {
        std::string list;
        for (std::size_t l : dropped) {
            list += (list.empty() ? "" : ",") + std::to_string(l);
        }
        warn("default lags {" + list + "} do not fit a history of " + std::to_string(history_length) +
             " steps with context " + std::to_string(context_length) + "; dropped");
    }
    return kept;
}

std::size_t FeatureConfig::covariate_count() const
{
    return covariates.empty() ? 0 : covariates.begin()->second.size();
}

std::size_t FeatureConfig::max_lag() const
{
    return lags.empty() ? 0 : *std::max_element(lags.begin(), lags.end());
}

std::size_t FeatureConfig::feature_width() const
{
    return 1 + lags.size() + kTimeFeatureCount + 2 * covariate_count();
}

void FeatureConfig::validate() const
{
    if (context_length == 0 || prediction_length == 0) {
        throw ValidationError("context and prediction lengths must be at least 1");
    }
    if (sensors.empty()) {
        throw ValidationError("feature config lists no sensors");
    }
    if (std::set<SensorId>(sensors.begin(), sensors.end()).size() != sensors.size()) {
        throw ValidationError("feature config lists a sensor twice");
    }
    for (std::size_t l : lags) {
        if (l == 0) {
            throw ValidationError("lags must be positive");
        }
    }
    if (!covariates.empty()) {
        const std::size_t k = covariate_count();
        for (const auto& s : sensors) {
            auto it = covariates.find(s);
            if (it == covariates.end()) {
                throw ValidationError("no covariates configured for sensor " + s.str());
            }
            if (it->second.size() != k) {
                throw ValidationError("sensor " + s.str() + " has " + std::to_string(it->second.size()) +
                                      " covariates, expected " + std::to_string(k));
            }
            if (std::find(it->second.begin(), it->second.end(), s) != it->second.end()) {
                throw ValidationError("sensor " + s.str() + " is listed as its own covariate");
            }
        }
    }
}

TrainingInstance make_instance(const SensorDataset& dataset, const FeatureConfig& config, const SensorId& sensor,
                               std::size_t start)
{
    const std::size_t C = config.context_length;
    const std::size_t P = config.prediction_length;
    const std::size_t L = config.lags.size();
    const std::size_t K = config.covariate_count();
    const std::size_t W = C + P;
    if (start < config.max_lag() || start + W > dataset.length()) {
        throw RangeError("window start " + std::to_string(start) + " is not admissible for length " +
                         std::to_string(dataset.length()));
    }
    auto sid = std::find(config.sensors.begin(), config.sensors.end(), sensor);
    if (sid == config.sensors.end()) {
        throw ValidationError("sensor " + sensor.str() + " is not part of the feature config");
    }
    const SensorSeries& series = dataset[dataset.index_of(sensor)];

    TrainingInstance inst;
    inst.sensor = sensor;
    inst.static_id = static_cast<std::size_t>(sid - config.sensors.begin());
    inst.start = start;
    inst.context_length = C;
    inst.prediction_length = P;
    inst.num_lags = L;
    inst.num_covariates = K;

    auto value_at = [&](const SensorSeries& s, std::size_t i) { return s.is_observed(i) ? s.value(i) : 0.0; };

    inst.target_context.resize(C);
    inst.observed_context.resize(C);
    double abs_sum = 0.0;
    std::size_t n_obs = 0;
    for (std::size_t p = 0; p < C; ++p) {
        inst.target_context[p] = value_at(series, start + p);
        inst.observed_context[p] = series.is_observed(start + p) ? 1 : 0;
        if (inst.observed_context[p]) {
            abs_sum += std::abs(inst.target_context[p]);
            ++n_obs;
        }
    }
    inst.scale = std::max(1.0, n_obs == 0 ? 0.0 : abs_sum / static_cast<double>(n_obs));

    inst.target_future.resize(P);
    inst.observed_future.resize(P);
    for (std::size_t j = 0; j < P; ++j) {
        inst.target_future[j] = value_at(series, start + C + j);
        inst.observed_future[j] = series.is_observed(start + C + j) ? 1 : 0;
    }

    inst.lag_features.assign(W * L, 0.0);
    inst.lag_observed.assign(W * L, 0);
    for (std::size_t p = 0; p < W; ++p) {
        for (std::size_t k = 0; k < L; ++k) {
            const std::size_t lag = config.lags[k];
            if (p >= lag && p - lag >= C) {
                continue;
            }
            const std::size_t src = start + p - lag;
            inst.lag_features[p * L + k] = value_at(series, src);
            inst.lag_observed[p * L + k] = series.is_observed(src) ? 1 : 0;
        }
    }

    inst.time_features.resize(W * kTimeFeatureCount);
    for (std::size_t p = 0; p < W; ++p) {
        const auto tf = time_features(series.timestamp(start + p), start + p);
        std::copy(tf.begin(), tf.end(), inst.time_features.begin() + static_cast<std::ptrdiff_t>(p * kTimeFeatureCount));
    }

    inst.covariate_channels.assign(W * K, 0.0);
    inst.covariate_indicator.assign(W * K, 0);
    if (K > 0) {
        const auto& covs = config.covariates.at(sensor);
        for (std::size_t c = 0; c < K; ++c) {
            const SensorSeries& cs = dataset[dataset.index_of(covs[c])];
            for (std::size_t p = 0; p < C; ++p) {
                if (cs.is_observed(start + p)) {
                    inst.covariate_channels[p * K + c] = cs.value(start + p);
                    inst.covariate_indicator[p * K + c] = 1;
                }
            }
        }
    }
    return inst;
}

std::vector<TrainingInstance> make_instances(const SensorDataset& dataset, const FeatureConfig& config,
                                             InstanceMode mode, std::uint64_t seed, std::size_t count)
{
    config.validate();
    const std::size_t W = config.context_length + config.prediction_length;
    const std::size_t lo = config.max_lag();
    if (dataset.length() < W || dataset.length() - W < lo) {
        throw InsufficientDataError("no admissible window: length " + std::to_string(dataset.length()) +
                                    " < max lag " + std::to_string(lo) + " + context + prediction " +
                                    std::to_string(W));
    }
    const std::size_t hi = dataset.length() - W;

    std::vector<TrainingInstance> out;
    if (mode != InstanceMode::train) {
        for (const auto& s : config.sensors) {
            out.push_back(make_instance(dataset, config, s, hi));
        }
        return out;
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_sensor(0, config.sensors.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_start(lo, hi);
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t s = pick_sensor(rng);
        const std::size_t start = pick_start(rng);
        out.push_back(make_instance(dataset, config, config.sensors[s], start));
    }
    return out;
}

} // namespace gattf
