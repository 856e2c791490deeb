#include "avdiff/model.hpp"

#include "avdiff/errors.hpp"

namespace avdiff {

DiffusionModel::DiffusionModel(const ModelConfig& cfg, bool temporal_audio, uint64_t init_seed)
    : cfg_(validate_config(cfg)), temporal_audio_(temporal_audio) {
  schedule_ = build_schedule(cfg.tsm_stride, cfg.tsm_expand_ratio, cfg.tsm_segments,
                             cfg.motion_frame_len, AbstractionStrategy::Uniform);
  Rng rng = Rng::keyed(init_seed, 0x6d6f64656cull /* "model" */);
  denoiser_ = std::make_unique<Denoiser>(ps_, "denoiser", cfg_, temporal_audio_, rng);
  refnet_ = std::make_unique<ReferenceNetwork>(ps_, "refnet", cfg_, rng);
  if (temporal_audio_) bank_ = std::make_unique<MotionLatentBank>(ps_, "motion_bank", cfg_, rng);
}

const MotionLatentBank& DiffusionModel::motion_bank() const {
  check(bank_ != nullptr, ErrorCode::InvalidConfig,
        "motion-latent bank exists only on the full (stage-2) model");
  return *bank_;
}

ReferenceFeatureCache DiffusionModel::extract_features(const ConditionBundle& cond) const {
  if (temporal_audio_ && !cond.mask_motion_frames && cond.motion_frames.defined() &&
      cond.motion_frames.shape()[0] > 0) {
    Tensor mf_abs = abstract_motion_frames(cond.motion_frames, schedule_);
    return refnet_->extract(cond.ref_latent, &mf_abs);
  }
  return refnet_->extract(cond.ref_latent, nullptr);
}

Tensor DiffusionModel::denoise(const Tensor& z_t, int t, const ConditionBundle& cond,
                               const Tensor* motion_latent,
                               const ReferenceFeatureCache* cache) const {
  check(t >= 0 && t < cfg_.noise_steps, ErrorCode::TOutOfRange,
        "timestep " + std::to_string(t) + " outside [0," + std::to_string(cfg_.noise_steps) + ")");

  Tensor temb = denoiser_->time_embedding(t);
  if (temporal_audio_ && motion_latent && !cond.mask_motion_latents) {
    check(motion_latent->shape() == Shape{cfg_.time_embed_dim}, ErrorCode::ShapeMismatch,
          "motion latent must be [time_embed_dim]");
    temb = add(temb, *motion_latent);
  }

  ReferenceFeatureCache local;
  const ReferenceFeatureCache* use = nullptr;
  if (!cond.drop_ref) {
    if (cache) {
      use = cache;
    } else {
      local = extract_features(cond);
      use = &local;
    }
  }

  std::vector<uint8_t> slot_validity;
  if (temporal_audio_ && !cond.motion_frame_validity.empty())
    slot_validity = abstract_validity(cond.motion_frame_validity, schedule_);

  UNetContext ctx;
  ctx.inject = use;
  ctx.audio = &cond.audio_embed;
  ctx.mask_audio = cond.mask_audio;
  ctx.mask_motion_frames = cond.mask_motion_frames;
  ctx.drop_ref = cond.drop_ref;
  ctx.slot_validity = slot_validity.empty() ? nullptr : &slot_validity;
  return denoiser_->forward(z_t, temb, ctx);
}

}  // namespace avdiff
