#include "gattf/mi_select.hpp"
#include "gattf/synthgen.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gattf;

namespace {

void BM_MutualInformation(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = u(rng);
        b[i] = a[i] + 0.1 * u(rng);
    }
    const auto ba = make_binning(a);
    const auto bb = make_binning(b);
    const auto xa = discretize(a, ba);
    const auto xb = discretize(b, bb);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mutual_information(xa, xb, ba.count, bb.count));
    }
}
BENCHMARK(BM_MutualInformation)->Arg(4896)->Arg(100000);

void BM_MiMatrixTemplate(benchmark::State& state)
{
    const auto data = generate(default_template(0, 0.2)).prefix(4896);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mi_matrix(data));
    }
}
BENCHMARK(BM_MiMatrixTemplate)->Unit(benchmark::kMillisecond);

} // namespace
