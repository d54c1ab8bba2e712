#include "gattf/autodiff.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace gattf;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, bool grad = false)
{
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<Scalar> v(r * c);
    for (auto& x : v) {
        x = n(rng);
    }
    return Tensor({r, c}, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state)
{
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    const Tensor a = random_matrix(n, n, rng);
    const Tensor b = random_matrix(n, n, rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(matmul(a, b));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

// Self-attention forward and backward at the scaled-down model width.
void BM_AttentionBackward(benchmark::State& state)
{
    const auto seq = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(2);
    Tensor x = random_matrix(seq, 64, rng, true);
    for (auto _ : state) {
        Tape tape;
        tape.backward(sum(multi_head_attention(x, x, x, 4, true)));
        benchmark::DoNotOptimize(x.grad());
    }
}
BENCHMARK(BM_AttentionBackward)->Arg(96)->Arg(288);

} // namespace

BENCHMARK_MAIN();
