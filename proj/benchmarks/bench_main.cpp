#include <benchmark/benchmark.h>

#include "chrono_shield/classifier.hpp"
#include "chrono_shield/mask.hpp"
#include "chrono_shield/shadow_attack.hpp"
#include "chrono_shield/synth.hpp"

using namespace chrono_shield;

namespace {

RasterImage sample_sign(int side) {
  Rng rng(3);
  return render_sign(0, sample_nuisance(rng), side).image;
}

void BM_Forward(benchmark::State& state) {
  const ModelWeights w = init_weights(Architecture{}, 1);
  const RasterImage img = sample_sign(64);
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, img));
}
BENCHMARK(BM_Forward);

void BM_Victim(benchmark::State& state) {
  const ScoringFunction victim = make_victim(init_weights(Architecture{}, 1));
  const RasterImage img = sample_sign(64);
  for (auto _ : state) benchmark::DoNotOptimize(victim(img));
}
BENCHMARK(BM_Victim);

void BM_Canny(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const RasterImage gray = to_grayscale(sample_sign(side));
  for (auto _ : state) benchmark::DoNotOptimize(canny_edges(gray, 50, 150));
}
BENCHMARK(BM_Canny)->Arg(64)->Arg(256);

void BM_GenerateMask(benchmark::State& state) {
  const RasterImage img = sample_sign(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(generate_mask(img));
}
BENCHMARK(BM_GenerateMask)->Arg(64)->Arg(256);

void BM_ApplyShadow(benchmark::State& state) {
  const RasterImage img = sample_sign(64);
  const BinaryMask mask = generate_mask(img);
  const ShadowSpec shadow{{{0.1, 0.2}, {0.8, 0.1}, {0.5, 0.9}}, 0.43};
  for (auto _ : state) benchmark::DoNotOptimize(apply_shadow(img, mask, shadow));
}
BENCHMARK(BM_ApplyShadow);

void BM_TrainStep(benchmark::State& state) {
  const ModelWeights w = init_weights(Architecture{}, 1);
  const LabeledImage sample{sample_sign(32), 0};
  for (auto _ : state) benchmark::DoNotOptimize(loss_gradient(w, sample));
}
BENCHMARK(BM_TrainStep);

}  // namespace
BENCHMARK_MAIN();
