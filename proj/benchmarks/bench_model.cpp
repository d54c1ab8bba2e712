#include "gattf/featurize.hpp"
#include "gattf/model.hpp"
#include "gattf/synthgen.hpp"

#include <benchmark/benchmark.h>

using namespace gattf;

namespace {

struct Fixture {
    SensorDataset data = generate(default_template(0, 0.2));
    FeatureConfig features;
    ModelParams params;
    TrainingInstance instance;

    Fixture()
    {
        features.context_length = 288;
        features.prediction_length = 96;
        features.lags = default_lags(data.step(), features.context_length, 4896);
        features.sensors = {SensorId("A6")};
        features.covariates[SensorId("A6")] = {SensorId("B1"), SensorId("C1")};
        ModelConfig m;
        m.d_model = 64;
        m.ff_dim = 256;
        m.heads = 4;
        m.encoder_layers = 2;
        m.decoder_layers = 1;
        params = ModelParams::initialize(with_features(m, features), 0);
        instance = make_instance(data, features, SensorId("A6"), 3000);
    }
};

const Fixture& fixture()
{
    static const Fixture f;
    return f;
}

void BM_TrainingStep(benchmark::State& state)
{
    const auto& f = fixture();
    ModelParams p = f.params.clone();
    std::mt19937_64 rng(4);
    for (auto _ : state) {
        p.zero_grad();
        Tape tape;
        tape.backward(instance_loss(p, f.instance, &rng));
    }
}
BENCHMARK(BM_TrainingStep)->Unit(benchmark::kMillisecond);

void BM_SampleForecast(benchmark::State& state)
{
    const auto& f = fixture();
    const auto samples = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_forecast(f.params, f.instance, samples, 5));
    }
}
BENCHMARK(BM_SampleForecast)->Arg(1)->Arg(20)->Unit(benchmark::kMillisecond);

} // namespace
