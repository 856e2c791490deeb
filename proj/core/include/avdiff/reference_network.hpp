#pragma once

#include "avdiff/config.hpp"
#include "avdiff/nn.hpp"
#include "avdiff/unet.hpp"

namespace avdiff {

/// Companion network sharing the denoiser's encoder/decoder structure (but
/// not its weights). Processes the reference latent and the abstracted
/// motion-frame latents frame-by-frame and records the spatial features
/// entering each attention block. It has no temporal or audio layers and no
/// output head; its timestep input is fixed at t = 0.
class ReferenceNetwork {
 public:
  ReferenceNetwork(nn::ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                   Rng& rng);

  /// ref_latent [C, h, w]; mf_latents [M', C, h, w] already abstracted, or
  /// nullptr when motion frames are absent (dropped, masked, or stage 1).
  ReferenceFeatureCache extract(const Tensor& ref_latent, const Tensor* mf_latents) const;

  const UNet& trunk() const { return unet_; }

 private:
  nn::Linear time_fc1_, time_fc2_;
  UNet unet_;
  int time_embed_dim_ = 0;
};

}  // namespace avdiff
