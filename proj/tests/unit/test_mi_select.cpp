#include "gattf/errors.hpp"
#include "gattf/log.hpp"
#include "gattf/mi_select.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

using namespace gattf;

namespace {

/// Direct evaluation of sum p(x,y) ln(p(x,y) / (p(x) p(y))) over an explicit joint table.
double brute_force_mi(const std::vector<int>& x, const std::vector<int>& y, int kx, int ky)
{
    std::vector<std::vector<double>> joint(kx, std::vector<double>(ky, 0.0));
    double n = 0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (x[t] >= 0 && y[t] >= 0) {
            joint[x[t]][y[t]] += 1;
            n += 1;
        }
    }
    std::vector<double> px(kx, 0.0), py(ky, 0.0);
    for (int a = 0; a < kx; ++a) {
        for (int b = 0; b < ky; ++b) {
            joint[a][b] /= n;
            px[a] += joint[a][b];
            py[b] += joint[a][b];
        }
    }
    double mi = 0.0;
    for (int a = 0; a < kx; ++a) {
        for (int b = 0; b < ky; ++b) {
            if (joint[a][b] > 0) {
                mi += joint[a][b] * std::log(joint[a][b] / (px[a] * py[b]));
            }
        }
    }
    return mi;
}

std::vector<double> uniform_values(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

double binned_mi(const std::vector<double>& a, const std::vector<double>& b)
{
    const auto ba = make_binning(a);
    const auto bb = make_binning(b);
    return mutual_information(discretize(a, ba), discretize(b, bb), ba.count, bb.count);
}

SensorSeries series(const char* id, std::vector<double> v)
{
    return SensorSeries(SensorId(id), 0, 300, std::move(v));
}

const std::vector<const char*> kSensorIds{"A1", "A2", "A3", "A4", "A5", "A6", "B1",
                                         "B2", "B3", "B4", "C1", "C2", "C3", "C4"};

/// Matrix holding only reference A6 and C3 rows.
MiMatrix reference_rows()
{
    const std::size_t n = kSensorIds.size();
    std::vector<SensorId> ids;
    for (auto s : kSensorIds) {
        ids.emplace_back(s);
    }
    std::vector<double> scores(n * n, std::numeric_limits<double>::quiet_NaN());
    auto idx = [&](const char* s) {
        return static_cast<std::size_t>(
            std::find_if(kSensorIds.begin(), kSensorIds.end(), [&](auto t) { return std::string(t) == s; }) -
            kSensorIds.begin());
    };
    const std::vector<std::pair<const char*, double>> a6{
        {"B1", 1.5237}, {"B2", 1.3214}, {"B3", 0.9101}, {"B4", 0.9349}, {"A1", 0.7067}, {"A2", 0.7898},
        {"A3", 0.5563}, {"A4", 1.4278}, {"A5", 1.3563}, {"C1", 0.9052}, {"C2", 1.0606}, {"C3", 1.6071},
        {"C4", 1.5833}};
    const std::vector<std::pair<const char*, double>> c3{
        {"B1", 1.0747}, {"B2", 1.1781}, {"B3", 0.9644}, {"B4", 1.0605}, {"A1", 0.5262}, {"A2", 0.7071},
        {"A3", 0.1747}, {"A4", 0.7649}, {"A5", 0.9099}, {"A6", 0.5695}, {"C1", 0.8746}, {"C2", 0.8832},
        {"C4", 1.5103}};
    for (const auto& [id, v] : a6) {
        scores[idx("A6") * n + idx(id)] = v;
    }
    for (const auto& [id, v] : c3) {
        scores[idx("C3") * n + idx(id)] = v;
    }
    return MiMatrix(std::move(ids), std::move(scores));
}

} // namespace

// --- binning --------------------------------------------------------------------------

TEST(FdRule, WidthOfZeroToNineNinetyNine)
{
    std::vector<double> v(1000);
    std::iota(v.begin(), v.end(), 0.0);
    const double h = fd_bin_width(v);
    EXPECT_EQ(h, 99.9);
    EXPECT_EQ(fd_bin_count(v, h), 10u);
}

TEST(FdRule, WidthOfTwoPointMass)
{
    std::vector<double> v(1000);
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = i % 2 == 0 ? 0.0 : 10.0;
    }
    EXPECT_EQ(fd_bin_width(v), 2.0);
}

TEST(FdRule, ConstantSeries)
{
    const std::vector<double> v(50, 7.0);
    EXPECT_EQ(fd_bin_width(v), 0.0);
    EXPECT_EQ(fd_bin_count(v, 0.0), 1u);
    const auto spec = make_binning(v);
    EXPECT_EQ(spec.count, 1u);
    EXPECT_FALSE(spec.sturges_fallback);
}

TEST(FdRule, CountIsCeilOfRangeOverWidth)
{
    const std::vector<double> v{0.0, 4.0, 10.0};
    EXPECT_EQ(fd_bin_count(v, 3.0), 4u);
}

TEST(FdRule, TooFewValuesThrow)
{
    const std::vector<double> v{1.0};
    EXPECT_THROW(fd_bin_width(v), InsufficientDataError);
}

TEST(FdRule, SturgesFallbackWhenIqrVanishes)
{
    std::vector<double> v(100, 5.0);
    v[0] = 0.0;
    v[99] = 50.0;
    const auto spec = make_binning(v);
    EXPECT_TRUE(spec.sturges_fallback);
    EXPECT_EQ(spec.count, static_cast<std::size_t>(std::ceil(std::log2(100.0))) + 1);
}

TEST(FdRule, QuantileType7)
{
    const std::vector<double> v{1, 2, 3, 4};
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 1.75);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.5), 2.5);
    EXPECT_DOUBLE_EQ(quantile_sorted(v, 1.0), 4.0);
}

TEST(Discretize, BoundariesAndFloor)
{
    const BinningSpec spec{10.0, 10, 0.0, 100.0, false};
    const std::vector<double> v{0.0, 37.2, 99.99, 100.0, -3.0, 250.0};
    EXPECT_EQ(discretize(v, spec), (std::vector<int>{0, 3, 9, 9, 0, 9}));
}

TEST(Discretize, SingleBin)
{
    const BinningSpec spec{0.0, 1, 3.0, 3.0, false};
    const std::vector<double> v{3.0, 3.0, 3.0};
    EXPECT_EQ(discretize(v, spec), (std::vector<int>{0, 0, 0}));
}

TEST(Discretize, MissingStepsGetMinusOne)
{
    const SensorSeries s(SensorId("X"), 0, 300, {1.0, 2.0, 3.0}, Mask{1, 0, 1});
    const BinningSpec spec{1.0, 3, 1.0, 3.0, false};
    EXPECT_EQ(discretize(s, spec), (std::vector<int>{0, -1, 2}));
}

// --- estimator ------------------------------------------------------------------------

TEST(MutualInformation, MatchesBruteForceOnSmallTables)
{
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 49);
        const int kx = 1 + static_cast<int>(rng() % 4);
        const int ky = 1 + static_cast<int>(rng() % 4);
        std::vector<int> x(n), y(n);
        for (int t = 0; t < n; ++t) {
            x[t] = static_cast<int>(rng() % kx);
            y[t] = rng() % 3 == 0 ? x[t] % ky : static_cast<int>(rng() % ky);
        }
        const double got = mutual_information(x, y, kx, ky);
        EXPECT_NEAR(got, std::max(0.0, brute_force_mi(x, y, kx, ky)), 1e-12) << "trial " << trial;
    }
}

TEST(MutualInformation, SelfInformationIsLogK)
{
    std::vector<int> x(800);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<int>(i % 8);
    }
    EXPECT_NEAR(mutual_information(x, x, 8, 8), std::log(8.0), 1e-9);
    EXPECT_NEAR(entropy(x, 8), std::log(8.0), 1e-9);
}

TEST(MutualInformation, ConstantMarginalGivesZero)
{
    std::mt19937_64 rng(1);
    std::vector<int> x(100, 0), y(100);
    for (auto& v : y) {
        v = static_cast<int>(rng() % 5);
    }
    EXPECT_EQ(mutual_information(x, y, 1, 5), 0.0);
}

TEST(MutualInformation, SymmetricAndNonNegative)
{
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> x(300), y(300);
        for (std::size_t t = 0; t < x.size(); ++t) {
            x[t] = static_cast<int>(rng() % 6);
            y[t] = static_cast<int>((x[t] + rng() % 3) % 5);
        }
        const auto xy = mutual_information_estimate(x, y, 6, 5);
        const auto yx = mutual_information_estimate(y, x, 5, 6);
        EXPECT_EQ(xy.value, yx.value);
        EXPECT_GE(xy.value, 0.0);
        EXPECT_GE(xy.raw, -1e-12);
        EXPECT_GE(mutual_information(x, x, 6, 6), xy.value);
    }
}

TEST(MutualInformation, LagPairsWithEarlierSteps)
{
    std::vector<int> y(400), x(400, 0);
    std::mt19937_64 rng(3);
    for (auto& v : y) {
        v = static_cast<int>(rng() % 4);
    }
    for (std::size_t t = 5; t < x.size(); ++t) {
        x[t] = y[t - 5];
    }
    const auto lagged = mutual_information_estimate(x, y, 4, 4, 5);
    EXPECT_EQ(lagged.n, 395u);
    EXPECT_NEAR(lagged.value, entropy(std::span<const int>(y).first(395), 4), 1e-12);
}

TEST(MutualInformation, MissingStepsAreSkipped)
{
    const std::vector<int> x{0, 1, -1, 1, 0};
    const std::vector<int> y{0, 1, 1, -1, 0};
    const auto est = mutual_information_estimate(x, y, 2, 2);
    EXPECT_EQ(est.n, 3u);
    EXPECT_NEAR(est.value, brute_force_mi(x, y, 2, 2), 1e-12);
}

TEST(MutualInformation, IndependentUniformStaysNearZero)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        const auto a = uniform_values(10000, rng);
        const auto b = uniform_values(10000, rng);
        EXPECT_LT(binned_mi(a, b), 0.05) << "seed " << seed;
    }
}

TEST(MutualInformation, PermutationDestroysDependence)
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> noise(0.0, 0.1);
        const auto x = uniform_values(5000, rng);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] = x[i] + noise(rng);
        }
        const double dependent = binned_mi(x, y);
        std::shuffle(y.begin(), y.end(), rng);
        EXPECT_LT(binned_mi(x, y), 0.1 * dependent) << "seed " << seed;
    }
}

// --- matrix ---------------------------------------------------------------------------

TEST(MiMatrixTest, TwoIdenticalSeriesGiveEntropyEverywhere)
{
    std::mt19937_64 rng(5);
    const auto v = uniform_values(2000, rng);
    const SensorDataset ds({series("P", v), series("Q", v)});
    const auto m = mi_matrix(ds);
    EXPECT_EQ(m.at(0, 1), m.at(1, 0));
    EXPECT_DOUBLE_EQ(m.at(0, 1), m.at(0, 0));
    EXPECT_DOUBLE_EQ(m.at(1, 1), m.at(0, 0));
    const auto b = m.binning()[0];
    EXPECT_NEAR(m.at(0, 0), entropy(discretize(v, b), b.count), 1e-12);
}

TEST(MiMatrixTest, IndependentNoiseSeries)
{
    std::mt19937_64 rng(6);
    const SensorDataset ds({series("N1", uniform_values(10000, rng)), series("N2", uniform_values(10000, rng)),
                            series("N3", uniform_values(10000, rng))});
    const auto m = mi_matrix(ds);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            if (i != j) {
                EXPECT_LT(m.at(i, j), 0.05);
            }
        }
    }
}

TEST(MiMatrixTest, CsvLayoutAndJsonRoundTrip)
{
    const MiMatrix m({SensorId("A"), SensorId("B")}, {1.0, 0.25, 0.25, std::numeric_limits<double>::quiet_NaN()});
    EXPECT_EQ(m.to_csv(), "sensor,A,B\nA,1.0000,0.2500\nB,0.2500,NA\n");
    const auto back = MiMatrix::from_json(m.to_json());
    EXPECT_EQ(back.ids(), m.ids());
    EXPECT_EQ(back.at(0, 1), 0.25);
    EXPECT_FALSE(back.has(1, 1));
}

// --- selection ------------------------------------------------------------------------

TEST(Selection, ReferenceRowsTopSixForA6)
{
    const auto m = reference_rows();
    const std::vector<SensorId> targets{SensorId("A6")};
    const auto sel = select_informative_covariates(m, targets, 6);
    ASSERT_EQ(sel.size(), 1u);
    std::vector<std::string> got;
    for (const auto& c : sel[0].covariates) {
        got.push_back(c.str());
    }
    EXPECT_EQ(got, (std::vector<std::string>{"C3", "C4", "B1", "A4", "A5", "B2"}));
    EXPECT_EQ(sel[0].scores, (std::vector<double>{1.6071, 1.5833, 1.5237, 1.4278, 1.3563, 1.3214}));
}

TEST(Selection, TargetsAreExcludedFromEveryList)
{
    const auto m = reference_rows();
    const std::vector<SensorId> targets{SensorId("A6"), SensorId("C3")};
    const auto sel = select_informative_covariates(m, targets, 6);
    std::vector<std::string> a6, c3;
    for (const auto& c : sel[0].covariates) {
        a6.push_back(c.str());
    }
    for (const auto& c : sel[1].covariates) {
        c3.push_back(c.str());
    }
    EXPECT_EQ(a6, (std::vector<std::string>{"C4", "B1", "A4", "A5", "B2", "C2"}));
    EXPECT_EQ(c3, (std::vector<std::string>{"C4", "B2", "B1", "B4", "B3", "A5"}));
}

TEST(Selection, ArgmaxAndTieBreakById)
{
    const MiMatrix m({SensorId("T"), SensorId("b"), SensorId("a"), SensorId("c")},
                     {2.0, 0.5, 0.5, 0.9, 0.5, 2.0, 0, 0, 0.5, 0, 2.0, 0, 0.9, 0, 0, 2.0});
    const std::vector<SensorId> targets{SensorId("T")};
    EXPECT_EQ(select_informative_covariates(m, targets, 1)[0].covariates, std::vector<SensorId>{SensorId("c")});
    const auto three = select_informative_covariates(m, targets, 3)[0].covariates;
    EXPECT_EQ(three, (std::vector<SensorId>{SensorId("c"), SensorId("a"), SensorId("b")}));
}

TEST(Selection, TopKIsClampedWithWarning)
{
    const auto m = reference_rows();
    const std::vector<SensorId> targets{SensorId("A6")};
    ScopedWarningCapture capture;
    const auto sel = select_informative_covariates(m, targets, 50);
    EXPECT_EQ(sel[0].covariates.size(), 13u);
    EXPECT_FALSE(capture.messages().empty());
}

TEST(Selection, LessInformativeSkipsSelectedAndBiasLevelScores)
{
    // T's partners: strong S, weak W1, W2 just above the bias floor (0.05) and Z below it.
    const std::vector<SensorId> ids{SensorId("S"), SensorId("T"), SensorId("W1"), SensorId("W2"), SensorId("Z")};
    std::vector<double> scores(25, 0.0);
    auto set = [&](std::size_t i, std::size_t j, double v) { scores[i * 5 + j] = scores[j * 5 + i] = v; };
    set(1, 0, 1.2);
    set(1, 2, 0.30);
    set(1, 3, 0.06);
    set(1, 4, 0.01);
    const std::vector<std::size_t> counts(25, 1000);
    const std::vector<BinningSpec> binning(5, BinningSpec{1.0, 11, 0.0, 11.0, false});
    const MiMatrix m(ids, scores, counts, binning);
    EXPECT_DOUBLE_EQ(mi_bias_floor(m, 1, 4), 100.0 / 2000.0);

    const std::vector<SensorId> targets{SensorId("T")};
    const std::vector<SensorId> exclude{SensorId("S")};
    const auto sel = select_less_informative(m, targets, exclude, 2);
    EXPECT_EQ(sel[0].covariates, (std::vector<SensorId>{SensorId("W1"), SensorId("W2")}));
}

TEST(Selection, LowPredictabilityThreshold)
{
    const std::map<SensorId, double> mase{{SensorId("A"), 0.8}, {SensorId("C"), 1.4}, {SensorId("B"), 1.0}};
    EXPECT_EQ(low_predictability_targets(mase), std::vector<SensorId>{SensorId("C")});
    EXPECT_EQ(low_predictability_targets(mase, 0.9), (std::vector<SensorId>{SensorId("B"), SensorId("C")}));
}

TEST(Selection, JsonRoundTrip)
{
    const CovariateSelection s{SensorId("A6"), {SensorId("B1"), SensorId("C3")}, {1.5, 1.25}};
    EXPECT_EQ(CovariateSelection::from_json(s.to_json()), s);
}
