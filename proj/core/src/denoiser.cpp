#include "avdiff/denoiser.hpp"

namespace avdiff {

Denoiser::Denoiser(nn::ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                   bool temporal_audio, Rng& rng)
    : time_fc1_(ps, prefix + ".time_fc1", cfg.time_embed_dim, cfg.time_embed_dim, rng),
      time_fc2_(ps, prefix + ".time_fc2", cfg.time_embed_dim, cfg.time_embed_dim, rng),
      unet_(ps, prefix + ".unet", cfg, temporal_audio, /*final_conv=*/true, rng),
      time_embed_dim_(cfg.time_embed_dim) {}

Tensor Denoiser::time_embedding(int t) const {
  return time_fc2_(silu(time_fc1_(nn::sinusoidal_embedding(t, time_embed_dim_))));
}

Tensor Denoiser::forward(const Tensor& z, const Tensor& temb, const UNetContext& ctx) const {
  return unet_.forward(z, temb, ctx);
}

}  // namespace avdiff
