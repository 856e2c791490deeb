#include "avdiff/diffusion.hpp"

#include <cmath>

#include "avdiff/errors.hpp"

namespace avdiff {

namespace {

void check_t(int t, const DiffusionSchedule& sched) {
  check(t >= 0 && t < sched.steps(), ErrorCode::TOutOfRange,
        "timestep " + std::to_string(t) + " outside [0," + std::to_string(sched.steps()) + ")");
}

}  // namespace

Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule& sched) {
  check_t(t, sched);
  check(z0.shape() == eps.shape(), ErrorCode::ShapeMismatch,
        "noise must match the clean latents in shape");
  double a = sched.alpha_cumprod[t];
  return add(scale(z0, std::sqrt(a)), scale(eps, std::sqrt(1.0 - a)));
}

Tensor recover_clean(const Tensor& z_t, int t, const Tensor& eps, const DiffusionSchedule& sched) {
  check_t(t, sched);
  double a = sched.alpha_cumprod[t];
  return scale(sub(z_t, scale(eps, std::sqrt(1.0 - a))), 1.0 / std::sqrt(a));
}

Tensor cfg_combine(const Tensor& e_audio, const Tensor& e_ref, const Tensor& e_base,
                   double audio_ratio, double ref_ratio) {
  check(e_audio.shape() == e_ref.shape() && e_ref.shape() == e_base.shape(),
        ErrorCode::ShapeMismatch, "guidance terms must share one shape");
  Tensor out = add(scale(sub(e_audio, e_ref), audio_ratio),
                   add(scale(sub(e_ref, e_base), ref_ratio), e_base));
  return out;
}

std::vector<int> ddim_timesteps(int total_steps, int sample_steps) {
  check(total_steps > 0, ErrorCode::NonPositiveDim, "schedule length must be positive");
  check(sample_steps > 0 && sample_steps <= total_steps, ErrorCode::InvalidConfig,
        "sample_steps must be in [1, T]");
  std::vector<int> ts(sample_steps);
  for (int i = 0; i < sample_steps; ++i)
    ts[i] = static_cast<int>((int64_t(total_steps) * i) / sample_steps);
  return ts;
}

Tensor ddim_sample(const EpsFn& eps_fn, const Shape& shape, const DiffusionSchedule& sched,
                   int sample_steps, Rng& rng) {
  NoGradGuard ng;
  std::vector<int> ts = ddim_timesteps(sched.steps(), sample_steps);
  Tensor x = Tensor::randn(shape, rng);
  for (int i = sample_steps - 1; i >= 0; --i) {
    int t = ts[i];
    double a = sched.alpha_cumprod[t];
    double a_prev = i > 0 ? sched.alpha_cumprod[ts[i - 1]] : 1.0;
    Tensor e = eps_fn(x, t);
    check(e.shape() == x.shape(), ErrorCode::ShapeMismatch,
          "epsilon prediction must match the sample shape");
    Tensor x0 = scale(sub(x, scale(e, std::sqrt(1.0 - a))), 1.0 / std::sqrt(a));
    x = add(scale(x0, std::sqrt(a_prev)), scale(e, std::sqrt(1.0 - a_prev)));
  }
  return x;
}

Tensor guided_epsilon(const DiffusionModel& model, const Tensor& x, int t,
                      const ConditionBundle& cond, const Tensor* motion_latent,
                      const ReferenceFeatureCache& cache, CfgRatios ratios) {
  Tensor e_audio = model.denoise(x, t, cond, motion_latent, &cache);

  // second pass: audio condition removed on both paths it feeds
  ConditionBundle ref_only = cond;
  ref_only.mask_audio = true;
  ref_only.mask_motion_latents = true;
  Tensor e_ref = model.denoise(x, t, ref_only, motion_latent, &cache);

  // third pass: reference dropped too (motion frames go with it)
  ConditionBundle base = ref_only;
  base.drop_ref = true;
  Tensor e_base = model.denoise(x, t, base, motion_latent, nullptr);

  return cfg_combine(e_audio, e_ref, e_base, ratios.audio, ratios.ref);
}

std::vector<Tensor> generate_long_video(const DiffusionModel& model,
                                        const DiffusionSchedule& sched, const Tensor& ref_latent,
                                        const Tensor& audio_windows, int n_clips,
                                        int sample_steps, CfgRatios ratios, Rng& rng) {
  NoGradGuard ng;
  const ModelConfig& cfg = model.config();
  check(model.has_temporal_audio(), ErrorCode::InvalidConfig,
        "long-video generation needs the full (stage-2) model");
  check(n_clips >= 1, ErrorCode::NonPositiveDim, "n_clips must be >= 1");
  const Shape& aw = audio_windows.shape();
  check(aw.size() == 3 && aw[1] == 5 && aw[2] == cfg.audio_feature_dim && aw[0] >= 1,
        ErrorCode::ShapeMismatch, "audio windows must be [n,5,audio_feature_dim]");

  int f = cfg.clip_len, c = cfg.latent_channels, h = cfg.latent_height, w = cfg.latent_width;
  int m = cfg.motion_frame_len;
  int64_t frame_elems = int64_t(c) * h * w;

  // raw generated-frame history, newest first
  std::vector<std::vector<double>> history;
  std::vector<Tensor> clips;

  for (int k = 0; k < n_clips; ++k) {
    ConditionBundle cond;
    cond.ref_latent = ref_latent;
    cond.motion_frames = Tensor::zeros({m, c, h, w});
    cond.motion_frame_validity.assign(size_t(m), 0);
    for (int i = 0; i < m && i < static_cast<int>(history.size()); ++i) {
      std::copy(history[i].begin(), history[i].end(),
                cond.motion_frames.data().begin() + i * frame_elems);
      cond.motion_frame_validity[size_t(i)] = 1;
    }

    cond.audio_embed = Tensor::zeros({f, 5, cfg.audio_feature_dim});
    for (int i = 0; i < f; ++i) {
      int row = std::min(k * f + i, aw[0] - 1);
      std::copy(audio_windows.data().begin() + int64_t(row) * 5 * cfg.audio_feature_dim,
                audio_windows.data().begin() + int64_t(row + 1) * 5 * cfg.audio_feature_dim,
                cond.audio_embed.data().begin() + int64_t(i) * 5 * cfg.audio_feature_dim);
    }

    // inference drives the motion latent from audio only
    Tensor motion_latent = model.motion_bank().from_audio(cond.audio_embed);
    ReferenceFeatureCache cache = model.extract_features(cond);

    EpsFn eps_fn = [&](const Tensor& x, int t) {
      return guided_epsilon(model, x, t, cond, &motion_latent, cache, ratios);
    };
    Tensor clip = ddim_sample(eps_fn, {f, c, h, w}, sched, sample_steps, rng);
    clips.push_back(clip);

    // push the clip's frames, newest first, and trim to M
    for (int i = f - 1; i >= 0; --i) {
      auto first = clip.data().begin() + int64_t(i) * frame_elems;
      history.insert(history.begin() + (f - 1 - i),
                     std::vector<double>(first, first + frame_elems));
    }
    if (static_cast<int>(history.size()) > m) history.resize(size_t(m));
  }
  return clips;
}

}  // namespace avdiff
