#include <benchmark/benchmark.h>

#include "moelab/harness.hpp"
#include "moelab/lmoe.hpp"
#include "moelab/matching.hpp"
#include "moelab/ops.hpp"
#include "moelab/rng.hpp"
#include "moelab/scenegen.hpp"

namespace {

using namespace moelab;

void MatMul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Value a = Value::constant(rng.gaussian_matrix(n, n));
  const Value b = Value::constant(rng.gaussian_matrix(n, n));
  for (auto _ : state) {
    Value c = matmul(a, b);
    benchmark::DoNotOptimize(c.val().data().data());
  }
  state.SetComplexityN(static_cast<int64_t>(n));
}
BENCHMARK(MatMul)->RangeMultiplier(2)->Range(16, 256)->Complexity();

void RowSoftmax(benchmark::State& state) {
  Rng rng(2);
  const Value x = Value::constant(rng.gaussian_matrix(64, static_cast<std::size_t>(state.range(0))));
  for (auto _ : state) {
    Value y = row_softmax(x);
    benchmark::DoNotOptimize(y.val().data().data());
  }
}
BENCHMARK(RowSoftmax)->Arg(18)->Arg(128);

void Hungarian(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  Tensor costs(n, n);
  for (std::size_t i = 0; i < costs.size(); ++i) costs[i] = rng.uniform(0.0, 10.0);
  for (auto _ : state) {
    Assignment a = hungarian(costs);
    benchmark::DoNotOptimize(a.total_cost);
  }
  state.SetComplexityN(static_cast<int64_t>(n));
}
BENCHMARK(Hungarian)->RangeMultiplier(2)->Range(8, 64)->Complexity();

void MixtureLayerForward(benchmark::State& state) {
  Rng rng(4);
  LMoEConfig cfg;
  cfg.experts = 4;
  cfg.top_k = 2;
  cfg.query_dim = 64;
  cfg.lang_dim = 64;
  cfg.routed_hidden = 512;
  cfg.shared_hidden = 1024;
  LMoELayer layer(cfg, 18, "bench", rng);
  const Value queries = Value::constant(rng.gaussian_matrix(16, 64));
  const Tensor p_language = rng.gaussian_matrix(18, 64);
  for (auto _ : state) {
    LMoEForward out = layer.forward(queries, p_language);
    benchmark::DoNotOptimize(out.output.val().data().data());
  }
}
BENCHMARK(MixtureLayerForward);

void GenerateScene(benchmark::State& state) {
  const SceneGenerator gen(SceneConfig{});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    Scene scene = gen.generate(seed++);
    benchmark::DoNotOptimize(scene.observations.data().data());
  }
}
BENCHMARK(GenerateScene);

void TrainingStep(benchmark::State& state) {
  ExperimentConfig cfg = preset_longtail(1);
  const SceneGenerator gen(cfg.scene);
  Model model(cfg.model, cfg.scene.vocab.size(), cfg.train.model_seed);
  Adam adam(model.parameters(), {cfg.train.lr, cfg.train.beta1, cfg.train.beta2,
                                 cfg.train.adam_eps});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    std::vector<Scene> batch;
    for (std::size_t j = 0; j < cfg.train.batch_scenes; ++j)
      batch.push_back(gen.generate(seed++));
    StepLoss loss = training_step(model, batch, gen.language().matrix, cfg, adam);
    benchmark::DoNotOptimize(loss.total);
  }
}
BENCHMARK(TrainingStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
