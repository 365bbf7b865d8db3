// Serial vs. OpenMP timings of the data-parallel kernels.
// Argument 0 selects the serial reference path, 1 the parallel path.
#include <benchmark/benchmark.h>

#include <random>

#include "dpm/field.hpp"
#include "dpm/model.hpp"
#include "dpm/patches.hpp"
#include "dpm/synth.hpp"

using namespace dpm;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

const synth::Sample& blob() {
  static const auto samples = [] {
    synth::ShapeSpec spec;
    spec.seed = 7;
    return synth::gen_dataset(1, spec, Exec::Serial);
  }();
  return samples.front();
}

void BM_DistanceTransform(benchmark::State& state) {
  const auto& mask = blob().mask;
  for (auto _ : state) benchmark::DoNotOptimize(field::distance_transform(mask, exec_of(state)));
}

void BM_BuildDynamic(benchmark::State& state) {
  const auto& mask = blob().mask;
  for (auto _ : state) benchmark::DoNotOptimize(field::build_dynamic(mask, exec_of(state)));
}

void BM_BuildDataset(benchmark::State& state) {
  const std::vector<patches::ImageMaskPair> pairs{{blob().image, blob().mask}};
  patches::DatasetConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(patches::build_dataset(pairs, cfg, exec_of(state)));
}

void BM_TrainBatch(benchmark::State& state) {
  const auto arch = model::Architecture::default_arch();
  const auto net = model::init_model<float>(arch, 1);
  constexpr std::size_t kBatch = 64;
  std::vector<float> inputs(kBatch * 64 * 64);
  std::mt19937_64 rng(3);
  std::normal_distribution<float> noise;
  for (float& v : inputs) v = noise(rng);
  std::vector<Vec2> targets(kBatch, Vec2{2.0, 0.0});
  std::vector<float> grads(net.params.size());
  model::Evaluator<float> eval(arch);
  for (auto _ : state) {
    eval.forward(net, inputs, kBatch, exec_of(state));
    benchmark::DoNotOptimize(eval.backward(net, targets, grads, exec_of(state)));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * kBatch));
}

}  // namespace

BENCHMARK(BM_DistanceTransform)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildDynamic)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildDataset)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TrainBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
