#include "avdiff/types.hpp"

#include <cmath>

#include "avdiff/errors.hpp"

namespace avdiff {

namespace {

void require_shape(const Tensor& t, const Shape& want, const char* what) {
  if (t.shape() != want) {
    std::string msg = std::string(what) + " has shape [";
    for (size_t i = 0; i < t.shape().size(); ++i)
      msg += (i ? "," : "") + std::to_string(t.shape()[i]);
    msg += "], expected [";
    for (size_t i = 0; i < want.size(); ++i) msg += (i ? "," : "") + std::to_string(want[i]);
    msg += "]";
    raise(ErrorCode::ShapeMismatch, msg);
  }
}

void require_finite(const Tensor& t, const char* what) {
  for (double v : t.data())
    if (!std::isfinite(v))
      raise(ErrorCode::ShapeMismatch, std::string(what) + " contains a non-finite value");
}

}  // namespace

void validate_clip(const LatentClip& clip, const ModelConfig& cfg) {
  require_shape(clip.data,
                {cfg.clip_len, cfg.latent_channels, cfg.latent_height, cfg.latent_width},
                "latent clip");
  require_finite(clip.data, "latent clip");
  if (!(clip.frame_rate > 0.0))
    raise(ErrorCode::InvalidConfig, "clip frame_rate must be positive");
}

void validate_bundle(const ConditionBundle& b, const ModelConfig& cfg) {
  require_shape(b.ref_latent, {cfg.latent_channels, cfg.latent_height, cfg.latent_width},
                "reference latent");
  require_shape(b.motion_frames,
                {cfg.motion_frame_len, cfg.latent_channels, cfg.latent_height, cfg.latent_width},
                "motion frame buffer");
  require_shape(b.audio_embed, {cfg.clip_len, 5, cfg.audio_feature_dim}, "audio embedding");
  require_finite(b.ref_latent, "reference latent");
  require_finite(b.motion_frames, "motion frame buffer");
  require_finite(b.audio_embed, "audio embedding");
  if (!std::isfinite(b.head_move_var) || !std::isfinite(b.expr_var))
    raise(ErrorCode::ShapeMismatch, "motion scalar conditions must be finite");
  if (b.head_move_var < 0.0 || b.expr_var < 0.0)
    raise(ErrorCode::InvalidConfig, "motion scalar conditions must be non-negative");
  if (!b.motion_frame_validity.empty()) {
    if (static_cast<int>(b.motion_frame_validity.size()) != cfg.motion_frame_len)
      raise(ErrorCode::ShapeMismatch, "motion_frame_validity length must equal motion_frame_len");
    // Slots flagged invalid must carry no signal: they are placeholders for
    // frames that do not exist yet.
    int c = cfg.latent_channels, h = cfg.latent_height, w = cfg.latent_width;
    const auto& d = b.motion_frames.data();
    for (int m = 0; m < cfg.motion_frame_len; ++m) {
      if (b.motion_frame_validity[m]) continue;
      for (int i = 0; i < c * h * w; ++i)
        if (d[size_t(m) * c * h * w + i] != 0.0)
          raise(ErrorCode::InvalidConfig,
                "motion frame slot " + std::to_string(m) + " is marked invalid but is non-zero");
    }
  }
}

DiffusionSchedule DiffusionSchedule::linear(int steps, double beta_start, double beta_end) {
  check(steps > 0, ErrorCode::NonPositiveDim, "noise_steps must be positive");
  DiffusionSchedule s;
  s.betas.resize(steps);
  s.alphas.resize(steps);
  s.alpha_cumprod.resize(steps);
  double cum = 1.0;
  for (int t = 0; t < steps; ++t) {
    double frac = steps == 1 ? 0.0 : double(t) / double(steps - 1);
    s.betas[t] = beta_start + (beta_end - beta_start) * frac;
    s.alphas[t] = 1.0 - s.betas[t];
    cum *= s.alphas[t];
    s.alpha_cumprod[t] = cum;
  }
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  check(!betas.empty(), ErrorCode::InvalidConfig, "noise schedule is empty");
  check(betas.size() == alphas.size() && betas.size() == alpha_cumprod.size(),
        ErrorCode::ShapeMismatch, "noise schedule arrays disagree in length");
  for (size_t t = 0; t < betas.size(); ++t) {
    check(betas[t] > 0.0 && betas[t] < 1.0, ErrorCode::InvalidConfig,
          "beta out of (0,1) at step " + std::to_string(t));
    check(std::abs(alphas[t] - (1.0 - betas[t])) < 1e-12, ErrorCode::InvalidConfig,
          "alpha != 1 - beta at step " + std::to_string(t));
  }
  check(alpha_cumprod.front() < 1.0, ErrorCode::InvalidConfig,
        "alpha_cumprod must start below 1");
  for (size_t t = 1; t < alpha_cumprod.size(); ++t)
    check(alpha_cumprod[t] < alpha_cumprod[t - 1], ErrorCode::InvalidConfig,
          "alpha_cumprod must be strictly decreasing");
  check(alpha_cumprod.back() > 0.0, ErrorCode::InvalidConfig,
        "alpha_cumprod must stay positive");
}

}  // namespace avdiff
