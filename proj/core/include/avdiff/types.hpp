#pragma once

#include <cstdint>
#include <vector>

#include "avdiff/config.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff {

/// Per-frame latents for one clip: data shape [F, C, h, w].
struct LatentClip {
  Tensor data;
  double frame_rate = 25.0;

  int frames() const { return data.defined() ? data.shape()[0] : 0; }
};

/// Checks finiteness and agreement with the config dimensions.
void validate_clip(const LatentClip& clip, const ModelConfig& cfg);

/// All conditioning inputs for one denoising call.
/// motion_frames are ordered closest-to-farthest from the current clip
/// (slot 0 = immediately preceding frame).
struct ConditionBundle {
  Tensor ref_latent;     // [C, h, w]
  Tensor motion_frames;  // [M, C, h, w]
  Tensor audio_embed;    // [F, 5, audio_feature_dim]
  double head_move_var = 0.0;
  double expr_var = 0.0;

  bool drop_ref = false;            // removes ref from spatial attn AND mf from temporal attn
  bool mask_motion_frames = false;  // mf features zeroed, concatenation kept
  bool mask_audio = false;          // audio features zeroed
  bool mask_motion_latents = false; // motion latent zeroed before timestep addition

  std::vector<uint8_t> motion_frame_validity;  // [M]; false = not yet generated (zero latent)
};

void validate_bundle(const ConditionBundle& bundle, const ModelConfig& cfg);

/// Noise-schedule constants shared by training and sampling.
struct DiffusionSchedule {
  std::vector<double> betas;
  std::vector<double> alphas;
  std::vector<double> alpha_cumprod;

  int steps() const { return static_cast<int>(betas.size()); }

  /// Linear betas (the usual DDPM ramp).
  static DiffusionSchedule linear(int T, double beta_start = 1e-4, double beta_end = 2e-2);

  /// Throws on violated invariants (beta range, strict decrease of cumprod).
  void validate() const;
};

}  // namespace avdiff
