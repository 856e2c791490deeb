#pragma once

#include <memory>

#include "avdiff/audio_to_latents.hpp"
#include "avdiff/config.hpp"
#include "avdiff/denoiser.hpp"
#include "avdiff/nn.hpp"
#include "avdiff/reference_network.hpp"
#include "avdiff/temporal_segment.hpp"
#include "avdiff/types.hpp"

namespace avdiff {

/// The full conditional noise predictor: reference network + denoiser (+
/// motion-latent bank and temporal/audio layers when `temporal_audio`).
/// Stage 1 trains with temporal_audio=false; stage 2 adds the remaining
/// modules on top of stage-1 weights.
class DiffusionModel {
 public:
  DiffusionModel(const ModelConfig& cfg, bool temporal_audio, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  bool has_temporal_audio() const { return temporal_audio_; }
  nn::ParamStore& params() { return ps_; }
  const nn::ParamStore& params() const { return ps_; }
  const SegmentSchedule& segment_schedule() const { return schedule_; }

  const Denoiser& denoiser() const { return *denoiser_; }
  const ReferenceNetwork& reference_network() const { return *refnet_; }
  const MotionLatentBank& motion_bank() const;

  /// Reference/motion-frame feature extraction for one condition bundle.
  /// Independent of z_t and t, so samplers compute it once per clip and
  /// pass it to denoise(). Honors mask_motion_frames (skips extraction of
  /// features that would be zeroed anyway).
  ReferenceFeatureCache extract_features(const ConditionBundle& cond) const;

  /// Conditional epsilon prediction for z_t [F, C, h, w] at timestep t.
  /// motion_latent (from the bank) may be null; the mask_motion_latents
  /// flag zeroes it regardless. `cache` short-circuits feature extraction.
  Tensor denoise(const Tensor& z_t, int t, const ConditionBundle& cond,
                 const Tensor* motion_latent, const ReferenceFeatureCache* cache = nullptr) const;

 private:
  ModelConfig cfg_;
  bool temporal_audio_ = false;
  nn::ParamStore ps_;
  SegmentSchedule schedule_;
  std::unique_ptr<Denoiser> denoiser_;
  std::unique_ptr<ReferenceNetwork> refnet_;
  std::unique_ptr<MotionLatentBank> bank_;
};

}  // namespace avdiff
