#include "gattf/errors.hpp"
#include "gattf/featurize.hpp"
#include "gattf/log.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gattf;

namespace {

constexpr Timestamp kMonday = 1704067200; // 2024-01-01T00:00:00Z

SensorDataset random_dataset(std::size_t n_sensors, std::size_t length, std::uint64_t seed, double missing = 0.05)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1500.0);
    std::bernoulli_distribution miss(missing);
    std::vector<SensorSeries> series;
    for (std::size_t s = 0; s < n_sensors; ++s) {
        std::vector<double> v(length);
        Mask m(length, 1);
        for (std::size_t i = 0; i < length; ++i) {
            v[i] = u(rng);
            if (miss(rng)) {
                m[i] = 0;
                v[i] = 0.0;
            }
        }
        series.emplace_back(SensorId("S" + std::to_string(s)), kMonday, 300, v, m);
    }
    return SensorDataset(std::move(series));
}

FeatureConfig small_config(bool with_covariates)
{
    FeatureConfig f;
    f.context_length = 12;
    f.prediction_length = 4;
    f.lags = {1, 3, 5};
    f.sensors = {SensorId("S0"), SensorId("S1")};
    if (with_covariates) {
        f.covariates[SensorId("S0")] = {SensorId("S2"), SensorId("S1")};
        f.covariates[SensorId("S1")] = {SensorId("S0"), SensorId("S2")};
    }
    return f;
}

} // namespace

TEST(Featurize, TimeFeaturesAtMondayMidnight)
{
    const auto tf = time_features(kMonday, 0);
    EXPECT_DOUBLE_EQ(tf[0], -0.5);
    EXPECT_DOUBLE_EQ(tf[1], -0.5);
    EXPECT_DOUBLE_EQ(tf[2], -0.5);
    EXPECT_DOUBLE_EQ(tf[3], 0.0);
}

TEST(Featurize, TimeFeaturesLateSunday)
{
    // Sunday 23:55; minute uses 55/59 rather than the full range.
    const Timestamp t = kMonday + 6 * 86400 + 23 * 3600 + 55 * 60;
    const auto tf = time_features(t, 287);
    EXPECT_NEAR(tf[0], 55.0 / 59.0 - 0.5, 1e-15);
    EXPECT_NEAR(tf[0], 0.4322, 1e-4);
    EXPECT_DOUBLE_EQ(tf[1], 0.5);
    EXPECT_DOUBLE_EQ(tf[2], 0.5);
    EXPECT_NEAR(tf[3], std::log(288.0), 1e-12);
}

TEST(Featurize, TimeFeaturesBeforeEpoch)
{
    // 1969-12-31T23:00:00Z was a Wednesday.
    const auto tf = time_features(-3600, 0);
    EXPECT_DOUBLE_EQ(tf[1], 0.5);
    EXPECT_DOUBLE_EQ(tf[2], 2.0 / 6.0 - 0.5);
}

TEST(Featurize, DefaultLagsFiveMinute)
{
    const std::vector<std::size_t> expected{1, 2, 3, 4, 5, 6, 7, 287, 288, 289, 575, 576, 577, 2015, 2016, 2017};
    EXPECT_EQ(default_lags(300, 576, 100000), expected);
}

TEST(Featurize, DefaultLagsDaily)
{
    EXPECT_EQ(default_lags(86400, 30, 1000), (std::vector<std::size_t>{1, 2, 3, 7}));
}

TEST(Featurize, DefaultLagsDropWithWarning)
{
    ScopedWarningCapture capture;
    const auto lags = default_lags(300, 576, 576 + 600);
    EXPECT_EQ(lags, (std::vector<std::size_t>{1, 2, 3, 4, 5, 6, 7, 287, 288, 289, 575, 576, 577}));
    ASSERT_EQ(capture.messages().size(), 1u);
    EXPECT_NE(capture.messages()[0].find("2015"), std::string::npos);
    EXPECT_THROW(default_lags(7, 10, 100), ValidationError);
    EXPECT_THROW(default_lags(0, 10, 100), ValidationError);
}

TEST(Featurize, ConfigValidation)
{
    auto f = small_config(true);
    EXPECT_NO_THROW(f.validate());
    EXPECT_EQ(f.feature_width(), 1u + 3u + 4u + 4u);
    f.covariates[SensorId("S0")] = {SensorId("S0"), SensorId("S2")};
    EXPECT_THROW(f.validate(), ValidationError);
    f = small_config(true);
    f.covariates[SensorId("S1")] = {SensorId("S0")};
    EXPECT_THROW(f.validate(), ValidationError);
    f = small_config(false);
    f.lags = {0};
    EXPECT_THROW(f.validate(), ValidationError);
    f = small_config(false);
    f.sensors.push_back(SensorId("S0"));
    EXPECT_THROW(f.validate(), ValidationError);
}

TEST(Featurize, ForecastWindowIsLastAdmissible)
{
    FeatureConfig f;
    f.sensors = {SensorId("S0")};
    f.lags = {1, 288};
    const auto ds = random_dataset(1, 5472, 1);
    const auto inst = make_instances(ds, f, InstanceMode::forecast);
    ASSERT_EQ(inst.size(), 1u);
    EXPECT_EQ(inst[0].start, 4608u);
    EXPECT_EQ(inst[0].start + inst[0].window(), 5472u);
}

TEST(Featurize, InsufficientHistory)
{
    auto f = small_config(false);
    f.lags = {100};
    EXPECT_THROW(make_instances(random_dataset(3, 110, 1), f, InstanceMode::train, 0, 4), InsufficientDataError);
    EXPECT_THROW(make_instance(random_dataset(3, 200, 1), f, SensorId("S0"), 99), RangeError);
    EXPECT_THROW(make_instance(random_dataset(3, 200, 1), f, SensorId("S2"), 100), ValidationError);
}

TEST(Featurize, FutureCovariatesAreZero)
{
    const auto ds = random_dataset(3, 80, 2, 0.0);
    const auto f = small_config(true);
    const auto inst = make_instance(ds, f, SensorId("S0"), 20);
    const std::size_t K = 2;
    for (std::size_t p = 0; p < inst.window(); ++p) {
        for (std::size_t c = 0; c < K; ++c) {
            if (p >= f.context_length) {
                EXPECT_EQ(inst.covariate_channels[p * K + c], 0.0);
                EXPECT_EQ(inst.covariate_indicator[p * K + c], 0);
            } else {
                EXPECT_EQ(inst.covariate_indicator[p * K + c], 1);
            }
        }
    }
    EXPECT_DOUBLE_EQ(inst.covariate_channels[0 * K + 0], ds[2].value(20));
    EXPECT_DOUBLE_EQ(inst.covariate_channels[5 * K + 1], ds[1].value(25));
}

TEST(Featurize, MasksMatchObservations)
{
    const auto ds = random_dataset(3, 300, 3, 0.3);
    const auto f = small_config(true);
    for (const auto& inst : make_instances(ds, f, InstanceMode::train, 7, 50)) {
        const auto& s = ds[ds.index_of(inst.sensor)];
        for (std::size_t p = 0; p < inst.context_length; ++p) {
            EXPECT_EQ(inst.observed_context[p] != 0, s.is_observed(inst.start + p));
            if (!inst.observed_context[p]) {
                EXPECT_EQ(inst.target_context[p], 0.0);
            }
        }
        for (std::size_t j = 0; j < inst.prediction_length; ++j) {
            EXPECT_EQ(inst.observed_future[j] != 0, s.is_observed(inst.start + inst.context_length + j));
        }
        for (std::size_t i = 0; i < inst.lag_features.size(); ++i) {
            if (!inst.lag_observed[i]) {
                EXPECT_EQ(inst.lag_features[i], 0.0);
            }
        }
        EXPECT_GE(inst.scale, 1.0);
    }
}

TEST(Featurize, LagsOnlyReachIntoContext)
{
    const auto ds = random_dataset(3, 100, 4, 0.0);
    const auto f = small_config(false);
    const auto inst = make_instance(ds, f, SensorId("S1"), 30);
    const std::size_t L = f.lags.size();
    for (std::size_t p = 0; p < inst.window(); ++p) {
        for (std::size_t k = 0; k < L; ++k) {
            const std::size_t lag = f.lags[k];
            const bool visible = p < lag || p - lag < f.context_length;
            EXPECT_EQ(inst.lag_observed[p * L + k], visible ? 1 : 0);
            if (visible) {
                EXPECT_DOUBLE_EQ(inst.lag_features[p * L + k], ds[1].value(30 + p - lag));
            }
        }
    }
}

TEST(Featurize, FutureValuesDoNotLeak)
{
    const auto ds = random_dataset(3, 120, 5);
    const auto f = small_config(true);
    const std::size_t start = 40;
    const std::size_t cut = start + f.context_length;
    std::vector<SensorSeries> altered;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 5000.0);
    for (const auto& s : ds.series()) {
        std::vector<double> v(s.values().begin(), s.values().end());
        Mask m(s.observed().begin(), s.observed().end());
        for (std::size_t i = cut; i < v.size(); ++i) {
            v[i] = u(rng);
            m[i] = 1;
        }
        altered.emplace_back(s.id(), s.start(), s.step(), v, m);
    }
    const SensorDataset ds2(std::move(altered));
    for (const auto& id : f.sensors) {
        const auto a = make_instance(ds, f, id, start);
        const auto b = make_instance(ds2, f, id, start);
        EXPECT_EQ(a.target_context, b.target_context);
        EXPECT_EQ(a.lag_features, b.lag_features);
        EXPECT_EQ(a.lag_observed, b.lag_observed);
        EXPECT_EQ(a.covariate_channels, b.covariate_channels);
        EXPECT_EQ(a.covariate_indicator, b.covariate_indicator);
        EXPECT_EQ(a.time_features, b.time_features);
        EXPECT_EQ(a.scale, b.scale);
    }
}

TEST(Featurize, ScaleIsContextMeanAbs)
{
    std::vector<double> v(40, 0.0);
    for (std::size_t i = 0; i < 40; ++i) {
        v[i] = static_cast<double>(i);
    }
    const SensorDataset ds({SensorSeries(SensorId("S0"), kMonday, 300, v)});
    FeatureConfig f;
    f.context_length = 10;
    f.prediction_length = 2;
    f.sensors = {SensorId("S0")};
    EXPECT_DOUBLE_EQ(make_instance(ds, f, SensorId("S0"), 10).scale, 14.5);
    // Small values are floored at one.
    EXPECT_DOUBLE_EQ(make_instance(ds, f, SensorId("S0"), 0).scale, 4.5);
    const SensorDataset tiny({SensorSeries(SensorId("S0"), kMonday, 300, std::vector<double>(40, 0.1))});
    EXPECT_DOUBLE_EQ(make_instance(tiny, f, SensorId("S0"), 0).scale, 1.0);
}

TEST(Featurize, AllMissingContextHasUnitScale)
{
    Mask m(40, 1);
    for (std::size_t i = 0; i < 10; ++i) {
        m[i] = 0;
    }
    const SensorDataset ds({SensorSeries(SensorId("S0"), kMonday, 300, std::vector<double>(40, 0.0), m)});
    FeatureConfig f;
    f.context_length = 10;
    f.prediction_length = 2;
    f.sensors = {SensorId("S0")};
    EXPECT_DOUBLE_EQ(make_instance(ds, f, SensorId("S0"), 0).scale, 1.0);
}

TEST(Featurize, SeededSamplingIsDeterministic)
{
    const auto ds = random_dataset(3, 300, 8);
    const auto f = small_config(true);
    const auto a = make_instances(ds, f, InstanceMode::train, 42, 30);
    const auto b = make_instances(ds, f, InstanceMode::train, 42, 30);
    ASSERT_EQ(a.size(), 30u);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].sensor, b[i].sensor);
        EXPECT_EQ(a[i].start, b[i].start);
        EXPECT_EQ(a[i].covariate_channels, b[i].covariate_channels);
        EXPECT_GE(a[i].start, f.max_lag());
        EXPECT_LE(a[i].start + a[i].window(), ds.length());
    }
}
