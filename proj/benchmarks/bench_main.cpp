// Microbenchmarks for the hot paths: the denoiser forward, reference-feature
// extraction, motion-frame abstraction, attention, and one sampler step.

#include <benchmark/benchmark.h>

#include <cmath>

#include "avdiff/diffusion.hpp"
#include "avdiff/model.hpp"
#include "avdiff/temporal_segment.hpp"

namespace {

using namespace avdiff;

const ModelConfig& toy_model() {
  static ModelConfig cfg = toy_preset().model;
  return cfg;
}

const DiffusionModel& toy_full_model() {
  static DiffusionModel model(toy_model(), /*temporal_audio=*/true, /*init_seed=*/1);
  return model;
}

ConditionBundle make_bundle(const ModelConfig& cfg, Rng& rng) {
  ConditionBundle cond;
  cond.ref_latent =
      Tensor::randn({cfg.latent_channels, cfg.latent_height, cfg.latent_width}, rng);
  cond.motion_frames = Tensor::randn(
      {cfg.motion_frame_len, cfg.latent_channels, cfg.latent_height, cfg.latent_width}, rng);
  cond.audio_embed = Tensor::randn({cfg.clip_len, 5, cfg.audio_feature_dim}, rng);
  return cond;
}

void BM_DenoiserForward(benchmark::State& state) {
  const ModelConfig& cfg = toy_model();
  const DiffusionModel& model = toy_full_model();
  Rng rng(2);
  ConditionBundle cond = make_bundle(cfg, rng);
  Tensor x = Tensor::randn({cfg.clip_len, cfg.latent_channels, cfg.latent_height,
                            cfg.latent_width},
                           rng);
  ReferenceFeatureCache cache = model.extract_features(cond);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(model.denoise(x, 500, cond, nullptr, &cache));
}
BENCHMARK(BM_DenoiserForward)->Unit(benchmark::kMillisecond);

void BM_ReferenceFeatureExtraction(benchmark::State& state) {
  const ModelConfig& cfg = toy_model();
  const DiffusionModel& model = toy_full_model();
  Rng rng(3);
  ConditionBundle cond = make_bundle(cfg, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(model.extract_features(cond));
}
BENCHMARK(BM_ReferenceFeatureExtraction)->Unit(benchmark::kMillisecond);

void BM_MotionFrameAbstraction(benchmark::State& state) {
  SegmentSchedule sched = build_schedule(4, 2, 5, 124, AbstractionStrategy::Mean);
  Rng rng(4);
  Tensor raw = Tensor::randn({124, 4, 8, 8}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(abstract_motion_frames(raw, sched));
}
BENCHMARK(BM_MotionFrameAbstraction)->Unit(benchmark::kMicrosecond);

void BM_MultiHeadAttention(benchmark::State& state) {
  const int dim = 64, tokens = int(state.range(0));
  nn::ParamStore ps;
  Rng rng(5);
  nn::MultiHeadAttention attn(ps, "attn", dim, dim, /*heads=*/8, rng);
  Tensor x = Tensor::randn({1, tokens, dim}, rng);
  NoGradGuard ng;
  for (auto _ : state) benchmark::DoNotOptimize(attn(x, x));
}
BENCHMARK(BM_MultiHeadAttention)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_SamplerStep(benchmark::State& state) {
  DiffusionSchedule sched = DiffusionSchedule::linear(1000);
  auto eps_fn = [&](const Tensor& x, int t) {
    return scale(x, std::sqrt(1.0 - sched.alpha_cumprod[size_t(t)]));
  };
  NoGradGuard ng;
  for (auto _ : state) {
    Rng rng(6);
    benchmark::DoNotOptimize(ddim_sample(eps_fn, {4, 4, 8, 8}, sched, 1, rng));
  }
}
BENCHMARK(BM_SamplerStep)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
