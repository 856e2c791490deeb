#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "avdiff/diffusion.hpp"
#include "avdiff/errors.hpp"
#include "test_util.hpp"

using namespace avdiff;
using avdiff_test::bitwise_equal;
using avdiff_test::max_abs_diff;

TEST_CASE("linear schedule satisfies its invariants") {
  DiffusionSchedule s = DiffusionSchedule::linear(1000);
  CHECK(s.steps() == 1000);
  CHECK_NOTHROW(s.validate());
  CHECK(s.betas.front() == doctest::Approx(1e-4));
  CHECK(s.betas.back() == doctest::Approx(2e-2));
  // alpha bookkeeping: alphas = 1 - betas; cumprod strictly decreasing in (0,1)
  double run = 1.0;
  for (int t = 0; t < s.steps(); ++t) {
    CHECK(s.alphas[size_t(t)] == doctest::Approx(1.0 - s.betas[size_t(t)]).epsilon(1e-12));
    run *= s.alphas[size_t(t)];
    CHECK(std::abs(s.alpha_cumprod[size_t(t)] - run) < 1e-12);
    if (t > 0) CHECK(s.alpha_cumprod[size_t(t)] < s.alpha_cumprod[size_t(t) - 1]);
    CHECK(s.alpha_cumprod[size_t(t)] > 0.0);
    CHECK(s.alpha_cumprod[size_t(t)] < 1.0);
  }
  // corrupted schedules are rejected
  DiffusionSchedule bad = s;
  bad.alpha_cumprod[500] = bad.alpha_cumprod[499] + 0.1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("noising and recovery are exact inverses given the same eps") {
  DiffusionSchedule s = DiffusionSchedule::linear(100);
  Rng rng(5);
  Tensor z0 = Tensor::randn({2, 3, 4, 4}, rng);
  Tensor eps = Tensor::randn({2, 3, 4, 4}, rng);
  for (int t : {0, 1, 37, 99}) {
    Tensor zt = add_noise(z0, t, eps, s);
    CHECK(max_abs_diff(recover_clean(zt, t, eps, s), z0) < 1e-12);
    // explicit formula check
    double a = s.alpha_cumprod[size_t(t)];
    Tensor manual = add(scale(z0, std::sqrt(a)), scale(eps, std::sqrt(1.0 - a)));
    CHECK(max_abs_diff(zt, manual) == 0.0);
  }
  CHECK_THROWS_AS((void)add_noise(z0, -1, eps, s), Error);
  CHECK_THROWS_AS((void)add_noise(z0, 100, eps, s), Error);
}

TEST_CASE("noised unit-gaussian data keeps unit variance at every t") {
  // Var[z_t] = acp + (1-acp) = 1 when z0 and eps are standard normal
  DiffusionSchedule s = DiffusionSchedule::linear(50);
  Rng rng(6);
  const int n = 20000;
  for (int t : {0, 25, 49}) {
    Tensor z0 = Tensor::randn({n}, rng);
    Tensor eps = Tensor::randn({n}, rng);
    Tensor zt = add_noise(z0, t, eps, s);
    double mean = 0.0, sq = 0.0;
    for (double v : zt.data()) {
      mean += v;
      sq += v * v;
    }
    mean /= n;
    double var = sq / n - mean * mean;
    // 3-sigma-ish slack for the sample variance of n gaussians
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / n) + 0.01);
  }
}

TEST_CASE("guidance combination is exact in 64-bit arithmetic") {
  Rng rng(7);
  Tensor ea = Tensor::randn({2, 3, 4, 4}, rng);
  Tensor er = Tensor::randn({2, 3, 4, 4}, rng);
  Tensor eb = Tensor::randn({2, 3, 4, 4}, rng);
  const double wa = 5.0, wr = 3.0;
  Tensor got = cfg_combine(ea, er, eb, wa, wr);
  for (size_t i = 0; i < got.data().size(); ++i) {
    double want = wa * (ea.data()[i] - er.data()[i]) +
                  (wr * (er.data()[i] - eb.data()[i]) + eb.data()[i]);
    CHECK(got.data()[i] == want);
  }
}

TEST_CASE("guidance collapses to identity when all three predictions agree") {
  Rng rng(8);
  Tensor e = Tensor::randn({3, 5}, rng);
  Tensor got = cfg_combine(e, e, e, 5.0, 3.0);
  // (w_a - w_a) e + (w_r - w_r) e + e; terms cancel exactly
  CHECK(bitwise_equal(got, e));
  // also with arbitrary ratios
  CHECK(bitwise_equal(cfg_combine(e, e, e, 12.5, -2.0), e));
}

TEST_CASE("guidance is affine in each prediction") {
  Rng rng(9);
  Tensor ea = Tensor::randn({6}, rng), er = Tensor::randn({6}, rng), eb = Tensor::randn({6}, rng);
  Tensor da = Tensor::randn({6}, rng);
  // moving e_audio by delta moves the output by audio_ratio * delta
  Tensor base = cfg_combine(ea, er, eb, 5.0, 3.0);
  Tensor moved = cfg_combine(add(ea, da), er, eb, 5.0, 3.0);
  CHECK(max_abs_diff(sub(moved, base), scale(da, 5.0)) < 1e-12);
  // moving e_ref by delta moves it by (ref_ratio - audio_ratio) * delta
  Tensor moved_r = cfg_combine(ea, add(er, da), eb, 5.0, 3.0);
  CHECK(max_abs_diff(sub(moved_r, base), scale(da, 3.0 - 5.0)) < 1e-12);
  // moving e_base by delta moves it by (1 - ref_ratio) * delta
  Tensor moved_b = cfg_combine(ea, er, add(eb, da), 5.0, 3.0);
  CHECK(max_abs_diff(sub(moved_b, base), scale(da, 1.0 - 3.0)) < 1e-12);
}

TEST_CASE("sampler timesteps: ascending, start at zero, integer spacing") {
  auto ts = ddim_timesteps(1000, 20);
  REQUIRE(ts.size() == 20);
  CHECK(ts.front() == 0);
  for (size_t i = 0; i < ts.size(); ++i) {
    CHECK(ts[i] == int((int64_t(1000) * int64_t(i)) / 20));
    if (i > 0) CHECK(ts[i] > ts[i - 1]);
    CHECK(ts[i] < 1000);
  }
  // degenerate but legal: one step
  auto one = ddim_timesteps(50, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 0);
  // sample_steps == total: identity ladder
  auto full = ddim_timesteps(8, 8);
  for (int i = 0; i < 8; ++i) CHECK(full[size_t(i)] == i);
  CHECK_THROWS_AS((void)ddim_timesteps(100, 0), Error);
  CHECK_THROWS_AS((void)ddim_timesteps(100, 101), Error);
  CHECK_THROWS_AS((void)ddim_timesteps(0, 1), Error);
}

TEST_CASE("deterministic sampler matches the closed form of a linear score model") {
  // For eps(x,t) = sqrt(1-acp_t) * x the DDIM update is linear:
  //   x0 = (x - (1-acp_t) x) / sqrt(acp_t) = sqrt(acp_t) x
  //   x' = sqrt(a_prev) x0 + sqrt(1-a_prev) eps
  //      = (sqrt(a_prev acp_t) + sqrt((1-a_prev)(1-acp_t))) x
  // so the whole trajectory is x_T times a product of scalar factors.
  DiffusionSchedule sched = DiffusionSchedule::linear(400);
  const int sample_steps = 25;
  const Shape shape{2, 3, 4, 4};

  auto eps_fn = [&](const Tensor& x, int t) {
    return scale(x, std::sqrt(1.0 - sched.alpha_cumprod[size_t(t)]));
  };
  Rng rng(1234);
  Tensor got = ddim_sample(eps_fn, shape, sched, sample_steps, rng);

  // reproduce the initial noise with an identically seeded generator
  Rng rng2(1234);
  Tensor x_T = Tensor::randn(shape, rng2);

  auto ts = ddim_timesteps(400, sample_steps);
  double factor = 1.0;
  for (int i = int(ts.size()) - 1; i >= 0; --i) {
    double a = sched.alpha_cumprod[size_t(ts[size_t(i)])];
    double a_prev = i > 0 ? sched.alpha_cumprod[size_t(ts[size_t(i) - 1])] : 1.0;
    factor *= std::sqrt(a_prev * a) + std::sqrt((1.0 - a_prev) * (1.0 - a));
  }
  CHECK(max_abs_diff(got, scale(x_T, factor)) < 1e-9);
}

TEST_CASE("sampler is bitwise deterministic under a fixed seed") {
  DiffusionSchedule sched = DiffusionSchedule::linear(100);
  auto eps_fn = [&](const Tensor& x, int t) {
    return scale(x, 0.5 * std::sqrt(1.0 - sched.alpha_cumprod[size_t(t)]));
  };
  Rng a(77), b(77), c(78);
  Tensor r1 = ddim_sample(eps_fn, {1, 2, 4, 4}, sched, 10, a);
  Tensor r2 = ddim_sample(eps_fn, {1, 2, 4, 4}, sched, 10, b);
  Tensor r3 = ddim_sample(eps_fn, {1, 2, 4, 4}, sched, 10, c);
  CHECK(bitwise_equal(r1, r2));
  CHECK_FALSE(bitwise_equal(r1, r3));
}

TEST_CASE("sampler never builds autodiff graphs") {
  DiffusionSchedule sched = DiffusionSchedule::linear(50);
  auto eps_fn = [&](const Tensor& x, int t) {
    (void)t;
    Tensor w = Tensor::full({1, 1, 1, 1}, 0.3);
    w.set_requires_grad(true);
    return mul(x, w);  // would record a graph if grads were enabled
  };
  Rng rng(3);
  Tensor out = ddim_sample(eps_fn, {1, 1, 2, 2}, sched, 5, rng);
  CHECK(out.is_leaf());
  CHECK_FALSE(out.requires_grad());
}

TEST_CASE("guided prediction equals three hand-run passes") {
  ModelConfig cfg;
  cfg.clip_len = 2;
  cfg.motion_frame_len = 2;
  cfg.tsm_stride = 1;
  cfg.tsm_expand_ratio = 1;
  cfg.tsm_segments = 2;
  cfg.latent_channels = 2;
  cfg.latent_height = 4;
  cfg.latent_width = 4;
  cfg.audio_feature_dim = 3;
  cfg.n_learnable_embeddings = 4;
  cfg.qkv_dim = 8;
  cfg.time_embed_dim = 8;
  cfg.unet_channel_schedule = {4};
  cfg.attention_heads = 2;
  cfg.noise_steps = 50;

  DiffusionModel model(cfg, /*temporal_audio=*/true, /*init_seed=*/21);
  Rng prng(22);
  avdiff_test::perturb_params(model.params(), prng);

  Rng rng(23);
  ConditionBundle cond;
  cond.ref_latent = Tensor::randn({2, 4, 4}, rng);
  cond.motion_frames = Tensor::randn({2, 2, 4, 4}, rng);
  cond.audio_embed = Tensor::randn({2, 5, 3}, rng);
  Tensor x = Tensor::randn({2, 2, 4, 4}, rng);
  Tensor ml = Tensor::randn({8}, rng);

  ReferenceFeatureCache cache = model.extract_features(cond);
  CfgRatios ratios;  // 5 / 3
  Tensor got = guided_epsilon(model, x, /*t=*/7, cond, &ml, cache, ratios);

  Tensor e_audio = model.denoise(x, 7, cond, &ml, &cache);
  ConditionBundle ref_only = cond;
  ref_only.mask_audio = true;
  ref_only.mask_motion_latents = true;
  Tensor e_ref = model.denoise(x, 7, ref_only, &ml, &cache);
  ConditionBundle base = ref_only;
  base.drop_ref = true;
  Tensor e_base = model.denoise(x, 7, base, &ml, nullptr);
  Tensor manual = cfg_combine(e_audio, e_ref, e_base, ratios.audio, ratios.ref);

  CHECK(bitwise_equal(got, manual));
  // the three passes genuinely differ on a perturbed model
  CHECK(max_abs_diff(e_audio, e_ref) > 1e-9);
  CHECK(max_abs_diff(e_ref, e_base) > 1e-9);
}

TEST_CASE("long-video loop feeds generated frames forward as motion history") {
  ModelConfig cfg;  // toy defaults: F=4, M=14
  DiffusionModel model(cfg, /*temporal_audio=*/true, /*init_seed=*/31);
  Rng rng(32);
  Tensor ref = Tensor::randn({cfg.latent_channels, cfg.latent_height, cfg.latent_width}, rng);
  Tensor audio = Tensor::randn({12, 5, cfg.audio_feature_dim}, rng);
  DiffusionSchedule sched = DiffusionSchedule::linear(cfg.noise_steps);

  Rng s1(5), s2(5);
  auto a = generate_long_video(model, sched, ref, audio, 3, 4, CfgRatios{}, s1);
  auto b = generate_long_video(model, sched, ref, audio, 3, 4, CfgRatios{}, s2);
  REQUIRE(a.size() == 3);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].shape() ==
          Shape{cfg.clip_len, cfg.latent_channels, cfg.latent_height, cfg.latent_width});
    CHECK(bitwise_equal(a[i], b[i]));
  }

  // audio rows past the end clamp to the last row: a 10-row track driving 12
  // frames equals a 12-row track whose last three rows are identical
  Tensor audio_short = slice(audio, 0, 0, 10);
  Tensor audio_clamped = Tensor::zeros({12, 5, cfg.audio_feature_dim});
  for (int f = 0; f < 12; ++f)
    for (int k = 0; k < 5; ++k)
      for (int d = 0; d < cfg.audio_feature_dim; ++d)
        audio_clamped.set({f, k, d}, audio.at({std::min(f, 9), k, d}));
  Rng s3(5), s4(5);
  auto c = generate_long_video(model, sched, ref, audio_short, 3, 4, CfgRatios{}, s3);
  auto d = generate_long_video(model, sched, ref, audio_clamped, 3, 4, CfgRatios{}, s4);
  for (size_t i = 0; i < c.size(); ++i) CHECK(bitwise_equal(c[i], d[i]));

  CHECK_THROWS_AS((void)generate_long_video(model, sched, ref, audio, 0, 4, CfgRatios{}, s1),
                  Error);
  Tensor bad_audio = Tensor::randn({12, 4, cfg.audio_feature_dim}, rng);
  CHECK_THROWS_AS((void)generate_long_video(model, sched, ref, bad_audio, 1, 4, CfgRatios{}, s1),
                  Error);
}
