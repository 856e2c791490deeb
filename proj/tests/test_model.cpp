#include <doctest.h>

#include <vector>

#include "avdiff/diffusion.hpp"
#include "avdiff/errors.hpp"
#include "avdiff/model.hpp"
#include "test_util.hpp"

using namespace avdiff;
using avdiff_test::bitwise_equal;
using avdiff_test::max_abs_diff;
using avdiff_test::perturb_params;

namespace {

ModelConfig small_cfg() {
  ModelConfig m;
  m.clip_len = 2;
  m.motion_frame_len = 2;
  m.tsm_stride = 1;
  m.tsm_expand_ratio = 1;
  m.tsm_segments = 2;
  m.latent_channels = 2;
  m.latent_height = 4;
  m.latent_width = 4;
  m.audio_feature_dim = 3;
  m.n_learnable_embeddings = 4;
  m.qkv_dim = 8;
  m.time_embed_dim = 8;
  m.unet_channel_schedule = {4};
  m.attention_heads = 2;
  m.noise_steps = 50;
  return m;
}

ConditionBundle make_bundle(const ModelConfig& cfg, uint64_t seed) {
  Rng rng(seed);
  ConditionBundle c;
  c.ref_latent = Tensor::randn({cfg.latent_channels, cfg.latent_height, cfg.latent_width}, rng);
  c.motion_frames = Tensor::randn(
      {cfg.motion_frame_len, cfg.latent_channels, cfg.latent_height, cfg.latent_width}, rng);
  c.audio_embed = Tensor::randn({cfg.clip_len, 5, cfg.audio_feature_dim}, rng);
  c.motion_frame_validity.assign(size_t(cfg.motion_frame_len), 1);
  return c;
}

// copies every shared parameter from `src` into `dst` (both models built
// over the same architecture names; dst may own extra parameters)
void copy_shared_params(const nn::ParamStore& src, nn::ParamStore& dst) {
  for (const std::string& name : src.names()) {
    Tensor s = src.get(name);
    Tensor d = dst.get(name);
    d.data() = s.data();
  }
}

}  // namespace

TEST_CASE("model construction validates its config") {
  ModelConfig bad = small_cfg();
  bad.clip_len = 0;
  CHECK_THROWS_AS(DiffusionModel(bad, true, 0), ConfigValidationError);
}

TEST_CASE("denoise returns epsilon predictions with the latent shape") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 1);
  ConditionBundle cond = make_bundle(cfg, 2);
  Rng rng(3);
  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  Tensor eps = model.denoise(z, 7, cond, nullptr);
  CHECK(eps.shape() == z.shape());
}

TEST_CASE("timesteps outside the schedule are rejected") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 1);
  ConditionBundle cond = make_bundle(cfg, 2);
  Rng rng(3);
  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  for (int t : {-1, cfg.noise_steps, cfg.noise_steps + 10}) {
    CAPTURE(t);
    try {
      (void)model.denoise(z, t, cond, nullptr);
      FAIL("expected TOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::TOutOfRange);
    }
  }
}

TEST_CASE("stage-1 model refuses temporal-only facilities") {
  ModelConfig cfg = small_cfg();
  DiffusionModel stage1(cfg, false, 1);
  CHECK_FALSE(stage1.has_temporal_audio());
  CHECK_THROWS_AS((void)stage1.motion_bank(), Error);
  DiffusionModel stage2(cfg, true, 1);
  CHECK_NOTHROW((void)stage2.motion_bank());
}

TEST_CASE("a fresh stage-2 model computes exactly the stage-1 function") {
  // zero-init contract: every added module (temporal attention, audio
  // attention, motion-latent bank) starts as an exact identity, so copying
  // stage-1 weights into a stage-2 model changes nothing about the output.
  ModelConfig cfg = small_cfg();
  DiffusionModel stage1(cfg, false, 11);
  DiffusionModel stage2(cfg, true, 22);  // different init seed on purpose
  copy_shared_params(stage1.params(), stage2.params());

  ConditionBundle cond = make_bundle(cfg, 5);
  Rng rng(6);
  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  Tensor e1 = stage1.denoise(z, 13, cond, nullptr);

  Tensor ml = stage2.motion_bank().from_audio(cond.audio_embed);
  Tensor e2 = stage2.denoise(z, 13, cond, &ml);
  CHECK(max_abs_diff(e1, e2) < 1e-12);
}

TEST_CASE("masked motion frames cannot influence the prediction") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 7);
  Rng prng(8);
  perturb_params(model.params(), prng);

  ConditionBundle a = make_bundle(cfg, 9);
  ConditionBundle b = a;
  Rng rng(10);
  b.motion_frames = Tensor::randn(a.motion_frames.shape(), rng);
  a.mask_motion_frames = true;
  b.mask_motion_frames = true;

  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  CHECK(bitwise_equal(model.denoise(z, 3, a, nullptr), model.denoise(z, 3, b, nullptr)));

  // unmasked, the same change must matter
  a.mask_motion_frames = false;
  b.mask_motion_frames = false;
  CHECK(max_abs_diff(model.denoise(z, 3, a, nullptr), model.denoise(z, 3, b, nullptr)) > 1e-9);
}

TEST_CASE("dropping the reference ignores reference and motion content entirely") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 12);
  Rng prng(13);
  perturb_params(model.params(), prng);

  ConditionBundle a = make_bundle(cfg, 14);
  ConditionBundle b = make_bundle(cfg, 15);  // completely different ref + motion + audio
  b.audio_embed = a.audio_embed;             // keep audio equal; it is not dropped here
  a.drop_ref = true;
  b.drop_ref = true;

  Rng rng(16);
  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  Tensor ea = model.denoise(z, 21, a, nullptr);
  Tensor eb = model.denoise(z, 21, b, nullptr);
  CHECK(bitwise_equal(ea, eb));

  // a stale feature cache must be inert under drop_ref as well
  ConditionBundle full = make_bundle(cfg, 17);
  ReferenceFeatureCache cache = model.extract_features(full);
  Tensor ec = model.denoise(z, 21, a, nullptr, &cache);
  CHECK(bitwise_equal(ea, ec));
}

TEST_CASE("explicit feature cache short-circuits extraction without changing results") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 18);
  Rng prng(19);
  perturb_params(model.params(), prng);

  ConditionBundle cond = make_bundle(cfg, 20);
  Rng rng(21);
  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  ReferenceFeatureCache cache = model.extract_features(cond);
  Tensor with_cache = model.denoise(z, 2, cond, nullptr, &cache);
  Tensor without = model.denoise(z, 2, cond, nullptr);
  CHECK(max_abs_diff(with_cache, without) < 1e-15);
}

TEST_CASE("feature extraction skips motion frames that are masked away") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 22);
  ConditionBundle cond = make_bundle(cfg, 23);
  ReferenceFeatureCache full = model.extract_features(cond);
  for (const auto& [id, entry] : full.blocks) CHECK(entry.mf_feats.defined());

  cond.mask_motion_frames = true;
  ReferenceFeatureCache masked = model.extract_features(cond);
  CHECK(masked.blocks.size() == full.blocks.size());
  for (const auto& [id, entry] : masked.blocks) CHECK_FALSE(entry.mf_feats.defined());
}

TEST_CASE("the motion latent feeds the timestep embedding; masking silences it") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 24);

  ConditionBundle cond = make_bundle(cfg, 25);
  Rng rng(26);
  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);

  // fresh bank: zero-init output projection -> latent is exactly zero
  Tensor ml0 = model.motion_bank().from_audio(cond.audio_embed);
  for (double v : ml0.data()) CHECK(v == 0.0);
  CHECK(bitwise_equal(model.denoise(z, 5, cond, &ml0), model.denoise(z, 5, cond, nullptr)));

  // live bank: the latent must matter...
  Rng prng(27);
  perturb_params(model.params(), prng);
  Tensor ml = model.motion_bank().from_audio(cond.audio_embed).detach();
  Tensor with_ml = model.denoise(z, 5, cond, &ml);
  Tensor without = model.denoise(z, 5, cond, nullptr);
  CHECK(max_abs_diff(with_ml, without) > 1e-9);

  // ...unless the mask flag is set, which zeroes it regardless
  cond.mask_motion_latents = true;
  CHECK(bitwise_equal(model.denoise(z, 5, cond, &ml), model.denoise(z, 5, cond, nullptr)));

  // wrong latent width is rejected
  cond.mask_motion_latents = false;
  Tensor bad = Tensor::randn({cfg.time_embed_dim + 1}, rng);
  CHECK_THROWS_AS((void)model.denoise(z, 5, cond, &bad), Error);
}

TEST_CASE("before any frames exist, motion-frame contents are irrelevant") {
  // cold start: the autoregressive sampler marks every raw slot invalid for
  // the first clip; whatever bytes sit in the buffer must not leak through.
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 28);
  Rng prng(29);
  perturb_params(model.params(), prng);

  ConditionBundle a = make_bundle(cfg, 30);
  ConditionBundle b = a;
  Rng rng(31);
  b.motion_frames = Tensor::randn(a.motion_frames.shape(), rng);
  a.motion_frame_validity.assign(size_t(cfg.motion_frame_len), 0);
  b.motion_frame_validity.assign(size_t(cfg.motion_frame_len), 0);

  Tensor z = Tensor::randn({cfg.clip_len, 2, 4, 4}, rng);
  CHECK(bitwise_equal(model.denoise(z, 9, a, nullptr), model.denoise(z, 9, b, nullptr)));
}

TEST_CASE("long-video generation: shapes, determinism, and condition sensitivity") {
  ModelConfig cfg = small_cfg();
  DiffusionModel model(cfg, true, 32);
  Rng prng(33);
  perturb_params(model.params(), prng, 0.02);

  DiffusionSchedule sched = DiffusionSchedule::linear(cfg.noise_steps);
  Rng rng(34);
  Tensor ref = Tensor::randn({2, 4, 4}, rng);
  Tensor audio = Tensor::randn({6, 5, 3}, rng);  // 3 clips x 2 frames

  Rng s1(77), s2(77), s3(78);
  std::vector<Tensor> clips = generate_long_video(model, sched, ref, audio, 3, 4, {}, s1);
  REQUIRE(clips.size() == 3);
  for (const Tensor& c : clips) CHECK(c.shape() == Shape{2, 2, 4, 4});

  std::vector<Tensor> again = generate_long_video(model, sched, ref, audio, 3, 4, {}, s2);
  for (size_t i = 0; i < 3; ++i) CHECK(bitwise_equal(clips[i], again[i]));

  std::vector<Tensor> other_noise = generate_long_video(model, sched, ref, audio, 3, 4, {}, s3);
  CHECK(max_abs_diff(clips[0], other_noise[0]) > 1e-9);

  Tensor ref2 = Tensor::randn({2, 4, 4}, rng);
  Rng s4(77);
  std::vector<Tensor> other_ref = generate_long_video(model, sched, ref2, audio, 3, 4, {}, s4);
  CHECK(max_abs_diff(clips[0], other_ref[0]) > 1e-9);

  // later clips depend on earlier generated content: clip 2 from the
  // different-reference run differs even given identical sampling noise
  CHECK(max_abs_diff(clips[2], other_ref[2]) > 1e-12);
}

TEST_CASE("the stage-1 trunk accepts any batch size; stage-2 requires clips") {
  ModelConfig cfg = small_cfg();
  DiffusionModel stage1(cfg, false, 35);
  ConditionBundle cond = make_bundle(cfg, 36);
  Rng rng(37);
  Tensor z1 = Tensor::randn({1, 2, 4, 4}, rng);
  Tensor z7 = Tensor::randn({7, 2, 4, 4}, rng);
  CHECK(stage1.denoise(z1, 0, cond, nullptr).shape() == Shape{1, 2, 4, 4});
  CHECK(stage1.denoise(z7, 0, cond, nullptr).shape() == Shape{7, 2, 4, 4});

  DiffusionModel stage2(cfg, true, 38);
  CHECK_THROWS_AS((void)stage2.denoise(z7, 0, cond, nullptr), Error);
}
