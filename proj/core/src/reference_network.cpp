#include "avdiff/reference_network.hpp"

#include "avdiff/errors.hpp"

namespace avdiff {

ReferenceNetwork::ReferenceNetwork(nn::ParamStore& ps, const std::string& prefix,
                                   const ModelConfig& cfg, Rng& rng)
    : time_fc1_(ps, prefix + ".time_fc1", cfg.time_embed_dim, cfg.time_embed_dim, rng),
      time_fc2_(ps, prefix + ".time_fc2", cfg.time_embed_dim, cfg.time_embed_dim, rng),
      unet_(ps, prefix + ".unet", cfg, /*temporal_audio=*/false, /*final_conv=*/false, rng),
      time_embed_dim_(cfg.time_embed_dim) {}

ReferenceFeatureCache ReferenceNetwork::extract(const Tensor& ref_latent,
                                                const Tensor* mf_latents) const {
  check(ref_latent.shape().size() == 3, ErrorCode::ShapeMismatch,
        "reference latent must be [C,h,w]");
  Shape batch_shape = {1, ref_latent.shape()[0], ref_latent.shape()[1], ref_latent.shape()[2]};
  Tensor batch = reshape(ref_latent, batch_shape);
  if (mf_latents) {
    check(mf_latents->shape().size() == 4, ErrorCode::ShapeMismatch,
          "motion-frame latents must be [M',C,h,w]");
    batch = concat({batch, *mf_latents}, 0);
  }

  // clean-latent network: fixed t=0 embedding
  Tensor temb = time_fc2_(silu(time_fc1_(nn::sinusoidal_embedding(0, time_embed_dim_))));

  ReferenceFeatureCache cache;
  UNetContext ctx;
  ctx.record = &cache;
  unet_.forward(batch, temb, ctx);
  return cache;
}

}  // namespace avdiff
