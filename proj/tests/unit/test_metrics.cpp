#include "gattf/errors.hpp"
#include "gattf/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gattf;

namespace {

SensorSeries periodic(std::size_t n, std::uint64_t seed, std::size_t season = 288, double scale = 1.0)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 40.0);
    std::vector<double> v(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double phase = 2.0 * M_PI * static_cast<double>(t % season) / static_cast<double>(season);
        v[t] = scale * (500.0 + 300.0 * std::sin(phase) + noise(rng));
    }
    return SensorSeries(SensorId("P"), 0, 300, std::move(v));
}

} // namespace

TEST(Metrics, PerfectForecast)
{
    const std::vector<double> a{1.0, 5.0, 9.0};
    EXPECT_EQ(mae(a, a), 0.0);
    EXPECT_EQ(rmse(a, a), 0.0);
    EXPECT_EQ(smape(a, a), 0.0);
    const auto insample = periodic(600, 1, 10);
    EXPECT_EQ(mase(a, a, {}, insample, 10), 0.0);
}

TEST(Metrics, HandComputedErrors)
{
    const std::vector<double> f{3.0, 0.0};
    const std::vector<double> a{0.0, 4.0};
    EXPECT_NEAR(mae(f, a), 3.5, 1e-9);
    EXPECT_NEAR(rmse(f, a), std::sqrt(12.5), 1e-9);
    EXPECT_NEAR(rmse(f, a), 3.5355339059327378, 1e-9);
}

TEST(Metrics, SmapeExamples)
{
    EXPECT_NEAR(smape(std::vector<double>{110.0}, std::vector<double>{100.0}), 20.0 / 210.0, 1e-9);
    EXPECT_NEAR(smape(std::vector<double>{110.0}, std::vector<double>{100.0}), 0.09523809523809523, 1e-9);
    EXPECT_EQ(smape(std::vector<double>{100.0}, std::vector<double>{0.0}), 2.0);
    EXPECT_EQ(smape(std::vector<double>{0.0}, std::vector<double>{0.0}), 0.0);
}

TEST(Metrics, MaseHandExample)
{
    // In-sample 0,1,2,3 with season 1: naive MAE 1, so MASE = MAE.
    const SensorSeries insample(SensorId("X"), 0, 60, {0.0, 1.0, 2.0, 3.0});
    const std::vector<double> f{4.0, 7.0};
    const std::vector<double> a{5.0, 5.0};
    EXPECT_NEAR(mase(f, a, {}, insample, 1), 1.5, 1e-9);
    // Season 2: |2-0|, |3-1| -> scale 2.
    EXPECT_NEAR(mase(f, a, {}, insample, 2), 0.75, 1e-9);
}

TEST(Metrics, MaskSelectsPositions)
{
    const std::vector<double> f{1.0, 100.0, 3.0};
    const std::vector<double> a{2.0, 0.0, 3.0};
    const std::vector<std::uint8_t> mask{1, 0, 1};
    EXPECT_NEAR(mae(f, a, mask), 0.5, 1e-12);
    EXPECT_NEAR(smape(f, a, mask), (2.0 / 3.0) / 2.0, 1e-12);
    const std::vector<std::uint8_t> none{0, 0, 0};
    EXPECT_THROW(mae(f, a, none), InsufficientDataError);
    EXPECT_THROW(mae(f, std::vector<double>{1.0}), ShapeError);
}

TEST(Metrics, RmseAtLeastMae)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 10.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> f(20), a(20);
        for (std::size_t i = 0; i < 20; ++i) {
            f[i] = n(rng);
            a[i] = n(rng);
        }
        EXPECT_GE(rmse(f, a), mae(f, a));
        EXPECT_NEAR(smape(f, a), smape(a, f), 1e-15);
    }
}

TEST(Metrics, ConstantInsampleIsUndefined)
{
    const SensorSeries flat(SensorId("F"), 0, 300, std::vector<double>(600, 42.0));
    const std::vector<double> f{1.0}, a{2.0};
    EXPECT_THROW(mase(f, a, {}, flat, 288), UndefinedMetricError);
}

TEST(Metrics, InsampleShorterThanSeason)
{
    const SensorSeries s(SensorId("S"), 0, 300, std::vector<double>{1.0, 2.0});
    EXPECT_THROW(seasonal_naive_scale(s, 288), InsufficientDataError);
}

TEST(Metrics, SeasonalNaivePairsSkipMissingEnds)
{
    const SensorSeries s(SensorId("S"), 0, 300, {0.0, 10.0, 4.0, 99.0}, Mask{1, 1, 1, 0});
    // pairs (0,2) -> 4; (1,3) skipped
    EXPECT_NEAR(seasonal_naive_scale(s, 2), 4.0, 1e-12);
}

TEST(Metrics, ScaleInvariance)
{
    const auto base = periodic(288 * 10, 5);
    const auto scaled = periodic(288 * 10, 5, 288, 3.0);
    const std::vector<double> f{400.0, 500.0, 650.0};
    const std::vector<double> a{420.0, 480.0, 700.0};
    std::vector<double> f3, a3;
    for (std::size_t i = 0; i < 3; ++i) {
        f3.push_back(3.0 * f[i]);
        a3.push_back(3.0 * a[i]);
    }
    EXPECT_NEAR(mase(f3, a3, {}, scaled, 288), mase(f, a, {}, base, 288), 1e-12);
    EXPECT_NEAR(smape(f3, a3), smape(f, a), 1e-15);
    EXPECT_NEAR(mae(f3, a3), 3.0 * mae(f, a), 1e-9);
    EXPECT_NEAR(rmse(f3, a3), 3.0 * rmse(f, a), 1e-9);
}

TEST(Metrics, SeasonalNaiveContinuationScoresNearOne)
{
    const std::size_t season = 288, n_in = season * 30, n_out = season * 30;
    const auto full = periodic(n_in + n_out, 11, season);
    const SensorSeries insample(full.id(), 0, 300,
                                std::vector<double>(full.values().begin(), full.values().begin() + n_in));
    std::vector<double> f(n_out), a(n_out);
    for (std::size_t t = 0; t < n_out; ++t) {
        a[t] = full.value(n_in + t);
        f[t] = full.value(n_in + t - season);
    }
    const double m = mase(f, a, {}, insample, season);
    EXPECT_GE(m, 0.95);
    EXPECT_LE(m, 1.05);
}

TEST(Metrics, ReportJson)
{
    const std::vector<double> f{3.0, 0.0}, a{0.0, 4.0};
    const SensorSeries insample(SensorId("X"), 0, 60, {0.0, 1.0, 2.0, 3.0});
    const auto r = evaluate_forecast(SensorId("X"), f, a, {}, insample, 1);
    EXPECT_EQ(r.horizon, 2u);
    EXPECT_NEAR(r.mase, 3.5, 1e-12);
    const auto j = r.to_json();
    EXPECT_EQ(j.at("target"), "X");
    EXPECT_NEAR(j.at("rmse").get<double>(), std::sqrt(12.5), 1e-12);
}
