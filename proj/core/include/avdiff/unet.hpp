#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avdiff/config.hpp"
#include "avdiff/nn.hpp"
#include "avdiff/rng.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff {

/// Per-block spatial features extracted by the reference network, consumed
/// by the denoiser's spatial attention (ref_feat) and inter-clip temporal
/// attention (mf_feats). Keys are attention-block ids in forward order.
struct ReferenceFeatureCache {
  struct Entry {
    Tensor ref_feat;  // [tokens, D]
    Tensor mf_feats;  // [M', tokens, D]; undefined when no motion frames
  };
  std::map<int, Entry> blocks;

  bool empty() const { return blocks.empty(); }
  const Entry& at(int block_id) const;  // throws MissingCacheEntry
};

/// GroupNorm-SiLU-conv pair with a timestep shift (FiLM) between the convs
/// and a 1x1 projection shortcut when channel counts differ.
struct ResBlock {
  nn::GroupNorm gn1, gn2;
  nn::Conv3x3 conv1, conv2;
  nn::Linear temb_proj;  // time_embed_dim -> out channels
  bool has_skip = false;
  nn::Linear skip;  // channel projection for the residual path

  ResBlock() = default;
  ResBlock(nn::ParamStore& ps, const std::string& prefix, int in_ch, int out_ch, int temb_dim,
           Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& temb) const;
};

/// 1x1 convolution expressed as a per-pixel linear map over channels.
Tensor channel_linear(const Tensor& x, const nn::Linear& lin);

Tensor to_tokens(const Tensor& x);                  // [N,C,H,W] -> [N, H*W, C]
Tensor from_tokens(const Tensor& t, int h, int w);  // [N, H*W, C] -> [N,C,H,W]

/// Pre-norm self-attention over spatial tokens. When `ref` is given, keys
/// and values are the concatenation [tokens ; ref tokens]; queries (and so
/// the output token count) never change.
struct SpatialAttention {
  nn::LayerNorm ln;
  nn::MultiHeadAttention attn;

  SpatialAttention() = default;
  SpatialAttention(nn::ParamStore& ps, const std::string& prefix, int dim, int heads, Rng& rng);
  // feat [N, T, D]; ref [T_ref, D] broadcast over N, or nullptr for plain
  // self-attention. Returns feat + attention (residual included).
  Tensor operator()(const Tensor& feat, const Tensor* ref) const;
};

/// Time-axis attention of the noisy frames over [motion frames ; noisy
/// frames], with learned type embeddings distinguishing the two.
struct InterClipTemporal {
  Tensor mf_embed;     // [M', D] learned type/position embedding
  Tensor noisy_embed;  // [F, D]
  nn::LayerNorm ln;
  nn::MultiHeadAttention attn;

  InterClipTemporal() = default;
  InterClipTemporal(nn::ParamStore& ps, const std::string& prefix, int m_slots, int clip_len,
                    int dim, int heads, Rng& rng);
  // noisy [F, tokens, D].
  // mf_feats == nullptr  -> motion frames dropped: attention over noisy only.
  // mask_mf              -> zero features in the motion slots, concat kept.
  // slot_validity        -> per-slot zeroing of not-yet-generated frames.
  Tensor operator()(const Tensor& noisy, const Tensor* mf_feats, bool mask_mf,
                    const std::vector<uint8_t>* slot_validity) const;
};

/// Per-frame cross-attention from spatial tokens to the frame's 5-token
/// audio window; the attention output is added to the input.
struct AudioCrossAttention {
  nn::LayerNorm ln;
  nn::MultiHeadAttention attn;  // dim_kv = audio_feature_dim

  AudioCrossAttention() = default;
  AudioCrossAttention(nn::ParamStore& ps, const std::string& prefix, int dim, int audio_dim,
                      int heads, Rng& rng);
  // noisy [F, tokens, D]; audio [F, 5, A]. mask_audio zeroes the audio
  // features but keeps the attention path.
  Tensor operator()(const Tensor& noisy, const Tensor& audio, bool mask_audio) const;
};

/// Time-axis self-attention over the clip's own frames only.
struct IntraClipTemporal {
  nn::LayerNorm ln;
  nn::MultiHeadAttention attn;

  IntraClipTemporal() = default;
  IntraClipTemporal(nn::ParamStore& ps, const std::string& prefix, int dim, int heads, Rng& rng);
  Tensor operator()(const Tensor& noisy) const;
};

/// Per-forward switches; pointers reference caller-owned data.
struct UNetContext {
  const ReferenceFeatureCache* inject = nullptr;  // spatial/temporal feature source
  ReferenceFeatureCache* record = nullptr;        // reference-network capture target
  const Tensor* audio = nullptr;                  // [F, 5, audio_feature_dim]
  bool mask_audio = false;
  bool mask_motion_frames = false;
  bool drop_ref = false;  // plain spatial attention AND no motion-frame concat
  const std::vector<uint8_t>* slot_validity = nullptr;  // [M'] abstracted slots
};

/// Encoder/decoder conv-attention trunk shared by the denoiser and the
/// reference network. Per attention block the order is: residual conv
/// (timestep-shifted) -> spatial attention (reference-injected) ->
/// inter-clip temporal -> audio cross-attention -> intra-clip temporal.
/// `temporal_audio` controls whether the temporal/audio layers exist at
/// all (the reference network and the stage-1 denoiser go without);
/// `final_conv` adds the norm+conv head back to latent channels.
class UNet {
 public:
  UNet(nn::ParamStore& ps, const std::string& prefix, const ModelConfig& cfg, bool temporal_audio,
       bool final_conv, Rng& rng);

  /// x [N, C, h, w]; temb [time_embed_dim]. With temporal layers, N must
  /// equal the configured clip length.
  Tensor forward(const Tensor& x, const Tensor& temb, const UNetContext& ctx) const;

  int attention_blocks() const { return static_cast<int>(blocks_.size()); }
  bool has_temporal_audio() const { return temporal_audio_; }

 private:
  struct Block {
    ResBlock res;
    SpatialAttention spatial;
    std::optional<InterClipTemporal> inter;
    std::optional<AudioCrossAttention> audio;
    std::optional<IntraClipTemporal> intra;
  };

  Tensor run_block(int id, const Tensor& x, const Tensor& temb, const UNetContext& ctx) const;

  ModelConfig cfg_;
  bool temporal_audio_ = false;
  bool final_conv_ = false;
  nn::Conv3x3 conv_in_;
  std::vector<Block> blocks_;       // enc[0..L-1], mid, dec[L-1..0] in forward order
  std::vector<nn::Conv3x3> downs_;  // stride-2 between encoder levels
  std::vector<nn::Conv3x3> ups_;    // conv after nearest-2x between decoder levels
  nn::GroupNorm gn_out_;
  nn::Conv3x3 conv_out_;
};

}  // namespace avdiff
