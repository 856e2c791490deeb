#pragma once

#include "avdiff/config.hpp"
#include "avdiff/nn.hpp"
#include "avdiff/unet.hpp"

namespace avdiff {

/// The noise-prediction network: timestep MLP plus the conv-attention trunk.
/// `temporal_audio=false` builds the stage-1 variant (no inter/intra-clip
/// temporal layers, no audio cross-attention).
class Denoiser {
 public:
  Denoiser(nn::ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
           bool temporal_audio, Rng& rng);

  /// Sinusoidal features of t through a two-layer MLP; [time_embed_dim].
  /// Motion latents are added to this by the caller before forward().
  Tensor time_embedding(int t) const;

  /// z [N, C, h, w] noisy latents -> predicted noise of the same shape.
  Tensor forward(const Tensor& z, const Tensor& temb, const UNetContext& ctx) const;

  const UNet& trunk() const { return unet_; }

 private:
  nn::Linear time_fc1_, time_fc2_;
  UNet unet_;
  int time_embed_dim_ = 0;
};

}  // namespace avdiff
