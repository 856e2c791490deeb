#include "avdiff/unet.hpp"

#include "avdiff/errors.hpp"

namespace avdiff {

const ReferenceFeatureCache::Entry& ReferenceFeatureCache::at(int block_id) const {
  auto it = blocks.find(block_id);
  check(it != blocks.end(), ErrorCode::MissingCacheEntry,
        "reference feature cache has no entry for attention block " + std::to_string(block_id));
  return it->second;
}

// ---------------------------------------------------------------------------
// building blocks
// ---------------------------------------------------------------------------

ResBlock::ResBlock(nn::ParamStore& ps, const std::string& prefix, int in_ch, int out_ch,
                   int temb_dim, Rng& rng)
    : gn1(ps, prefix + ".gn1", in_ch),
      gn2(ps, prefix + ".gn2", out_ch),
      conv1(ps, prefix + ".conv1", in_ch, out_ch, rng),
      conv2(ps, prefix + ".conv2", out_ch, out_ch, rng),
      temb_proj(ps, prefix + ".temb", temb_dim, out_ch, rng),
      has_skip(in_ch != out_ch) {
  if (has_skip) skip = nn::Linear(ps, prefix + ".skip", in_ch, out_ch, rng);
}

Tensor ResBlock::operator()(const Tensor& x, const Tensor& temb) const {
  Tensor h = conv1(silu(gn1(x)));
  Tensor shift = temb_proj(silu(temb));  // [out]
  int out_ch = shift.shape()[0];
  // The shift goes in after the second normalization: with one channel per
  // group (small channel counts) the norm would erase a pre-norm per-channel
  // constant exactly, severing the timestep/motion-latent conditioning.
  h = add(gn2(h), reshape(shift, {1, out_ch, 1, 1}));
  h = conv2(silu(h));
  Tensor sc = has_skip ? channel_linear(x, skip) : x;
  return add(sc, h);
}

Tensor channel_linear(const Tensor& x, const nn::Linear& lin) {
  const Shape& s = x.shape();
  check(s.size() == 4, ErrorCode::ShapeMismatch, "channel_linear expects [N,C,H,W]");
  Tensor t = permute(x, {0, 2, 3, 1});  // [N,H,W,C]
  t = lin(t);
  return permute(t, {0, 3, 1, 2});
}

Tensor to_tokens(const Tensor& x) {
  const Shape& s = x.shape();
  check(s.size() == 4, ErrorCode::ShapeMismatch, "to_tokens expects [N,C,H,W]");
  return reshape(permute(x, {0, 2, 3, 1}), {s[0], s[2] * s[3], s[1]});
}

Tensor from_tokens(const Tensor& t, int h, int w) {
  const Shape& s = t.shape();
  check(s.size() == 3 && s[1] == h * w, ErrorCode::ShapeMismatch,
        "from_tokens expects [N," + std::to_string(h * w) + ",C]");
  return permute(reshape(t, {s[0], h, w, s[2]}), {0, 3, 1, 2});
}

SpatialAttention::SpatialAttention(nn::ParamStore& ps, const std::string& prefix, int dim,
                                   int heads, Rng& rng)
    : ln(ps, prefix + ".ln", dim), attn(ps, prefix + ".attn", dim, dim, heads, rng) {}

Tensor SpatialAttention::operator()(const Tensor& feat, const Tensor* ref) const {
  Tensor q = ln(feat);
  Tensor kv = q;
  if (ref) {
    check(ref->shape().size() == 2 && ref->shape()[1] == feat.shape()[2],
          ErrorCode::ShapeMismatch, "reference feature width does not match block width");
    Tensor ref_b = expand_leading(*ref, feat.shape()[0]);  // [N, T_ref, D]
    kv = ln(concat({feat, ref_b}, 1));
  }
  return add(feat, attn(q, kv));
}

InterClipTemporal::InterClipTemporal(nn::ParamStore& ps, const std::string& prefix, int m_slots,
                                     int clip_len, int dim, int heads, Rng& rng)
    : mf_embed(ps.add(prefix + ".mf_embed", Tensor::randn({m_slots, dim}, rng, 0.02))),
      noisy_embed(ps.add(prefix + ".noisy_embed", Tensor::randn({clip_len, dim}, rng, 0.02))),
      ln(ps, prefix + ".ln", dim),
      attn(ps, prefix + ".attn", dim, dim, heads, rng) {}

Tensor InterClipTemporal::operator()(const Tensor& noisy, const Tensor* mf_feats, bool mask_mf,
                                     const std::vector<uint8_t>* slot_validity) const {
  const Shape& s = noisy.shape();
  check(s.size() == 3, ErrorCode::ShapeMismatch, "inter-clip input must be [F,tokens,D]");
  int f = s[0], tokens = s[1], d = s[2];
  check(f == noisy_embed.shape()[0], ErrorCode::ShapeMismatch,
        "clip length does not match the learned noisy-frame embedding");
  int m_slots = mf_embed.shape()[0];

  Tensor noisy_e = add(noisy, reshape(noisy_embed, {f, 1, d}));

  Tensor seq;  // [M'+F or F, tokens, D]
  bool with_mf = mask_mf || mf_feats != nullptr;
  if (with_mf) {
    Tensor mf_use;
    if (mask_mf) {
      mf_use = Tensor::zeros({m_slots, tokens, d});
    } else {
      check(mf_feats->shape() == Shape{m_slots, tokens, d}, ErrorCode::ShapeMismatch,
            "motion-frame features must be [M',tokens,D]");
      mf_use = *mf_feats;
      if (slot_validity && !slot_validity->empty()) {
        check(static_cast<int>(slot_validity->size()) == m_slots, ErrorCode::ShapeMismatch,
              "slot validity length must equal the abstracted slot count");
        Tensor mask = Tensor::zeros({m_slots, 1, 1});
        for (int i = 0; i < m_slots; ++i) mask.data()[i] = (*slot_validity)[i] ? 1.0 : 0.0;
        mf_use = mul(mf_use, mask);
      }
    }
    seq = concat({add(mf_use, reshape(mf_embed, {m_slots, 1, d})), noisy_e}, 0);
  } else {
    seq = noisy_e;
  }

  // attention along the time axis, independent per spatial token
  Tensor q_in = ln(permute(noisy_e, {1, 0, 2}));  // [tokens, F, D]
  Tensor kv_in = ln(permute(seq, {1, 0, 2}));     // [tokens, M'+F, D]
  Tensor h = attn(q_in, kv_in);
  return add(noisy, permute(h, {1, 0, 2}));
}

AudioCrossAttention::AudioCrossAttention(nn::ParamStore& ps, const std::string& prefix, int dim,
                                         int audio_dim, int heads, Rng& rng)
    : ln(ps, prefix + ".ln", dim), attn(ps, prefix + ".attn", dim, audio_dim, heads, rng) {}

Tensor AudioCrossAttention::operator()(const Tensor& noisy, const Tensor& audio,
                                       bool mask_audio) const {
  const Shape& s = noisy.shape();
  check(s.size() == 3, ErrorCode::ShapeMismatch, "audio attention input must be [F,tokens,D]");
  check(audio.shape().size() == 3 && audio.shape()[0] == s[0], ErrorCode::ShapeMismatch,
        "audio embedding must have one window per clip frame");
  Tensor kv = mask_audio ? Tensor::zeros(audio.shape()) : audio;
  return add(noisy, attn(ln(noisy), kv));
}

IntraClipTemporal::IntraClipTemporal(nn::ParamStore& ps, const std::string& prefix, int dim,
                                     int heads, Rng& rng)
    : ln(ps, prefix + ".ln", dim), attn(ps, prefix + ".attn", dim, dim, heads, rng) {}

Tensor IntraClipTemporal::operator()(const Tensor& noisy) const {
  const Shape& s = noisy.shape();
  check(s.size() == 3, ErrorCode::ShapeMismatch, "intra-clip input must be [F,tokens,D]");
  Tensor t = ln(permute(noisy, {1, 0, 2}));  // [tokens, F, D]
  Tensor h = attn(t, t);
  return add(noisy, permute(h, {1, 0, 2}));
}

// ---------------------------------------------------------------------------
// trunk
// ---------------------------------------------------------------------------

UNet::UNet(nn::ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
           bool temporal_audio, bool final_conv, Rng& rng)
    : cfg_(cfg), temporal_audio_(temporal_audio), final_conv_(final_conv) {
  const auto& chans = cfg.unet_channel_schedule;
  int levels = static_cast<int>(chans.size());
  check(levels >= 1, ErrorCode::InvalidConfig, "unet_channel_schedule must not be empty");

  conv_in_ = nn::Conv3x3(ps, prefix + ".conv_in", cfg.latent_channels, chans[0], rng);

  auto make_block = [&](const std::string& name, int in_ch, int out_ch) {
    Block b;
    b.res = ResBlock(ps, prefix + "." + name + ".res", in_ch, out_ch, cfg.time_embed_dim, rng);
    b.spatial = SpatialAttention(ps, prefix + "." + name + ".spatial", out_ch,
                                 cfg.attention_heads, rng);
    if (temporal_audio_) {
      b.inter.emplace(ps, prefix + "." + name + ".inter", cfg.tsm_slots(), cfg.clip_len, out_ch,
                      cfg.attention_heads, rng);
      b.audio.emplace(ps, prefix + "." + name + ".audio", out_ch, cfg.audio_feature_dim,
                      cfg.attention_heads, rng);
      b.intra.emplace(ps, prefix + "." + name + ".intra", out_ch, cfg.attention_heads, rng);
    }
    blocks_.push_back(std::move(b));
  };

  for (int l = 0; l < levels; ++l) {
    make_block("enc" + std::to_string(l), chans[l], chans[l]);
    if (l + 1 < levels)
      downs_.emplace_back(ps, prefix + ".down" + std::to_string(l), chans[l], chans[l + 1], rng,
                          nn::Init::Normal, /*stride=*/2);
  }
  make_block("mid", chans[levels - 1], chans[levels - 1]);
  for (int l = levels - 1; l >= 0; --l) {
    make_block("dec" + std::to_string(l), 2 * chans[l], chans[l]);
    if (l > 0)
      ups_.emplace_back(ps, prefix + ".up" + std::to_string(l), chans[l], chans[l - 1], rng);
  }

  if (final_conv_) {
    gn_out_ = nn::GroupNorm(ps, prefix + ".gn_out", chans[0]);
    conv_out_ = nn::Conv3x3(ps, prefix + ".conv_out", chans[0], cfg.latent_channels, rng,
                            nn::Init::Zero);
  }
}

Tensor UNet::run_block(int id, const Tensor& x, const Tensor& temb, const UNetContext& ctx) const {
  const Block& b = blocks_[id];
  Tensor y = b.res(x, temb);
  int h = y.shape()[2], w = y.shape()[3];
  Tensor feat = to_tokens(y);  // [N, h*w, D]

  if (ctx.record) {
    int n = feat.shape()[0];
    ReferenceFeatureCache::Entry e;
    e.ref_feat = reshape(slice(feat, 0, 0, 1), {feat.shape()[1], feat.shape()[2]});
    if (n > 1) e.mf_feats = slice(feat, 0, 1, n - 1);
    ctx.record->blocks[id] = std::move(e);
  }

  const Tensor* ref = nullptr;
  Tensor ref_local;
  if (ctx.inject && !ctx.drop_ref) {
    ref_local = ctx.inject->at(id).ref_feat;
    ref = &ref_local;
  }
  feat = b.spatial(feat, ref);

  if (b.inter) {
    const Tensor* mf = nullptr;
    Tensor mf_local;
    if (ctx.inject && !ctx.drop_ref && !ctx.mask_motion_frames) {
      mf_local = ctx.inject->at(id).mf_feats;
      if (mf_local.defined()) mf = &mf_local;
    }
    bool mask_mf = ctx.mask_motion_frames && !ctx.drop_ref;
    feat = (*b.inter)(feat, mf, mask_mf, ctx.slot_validity);
    check(ctx.audio != nullptr, ErrorCode::ShapeMismatch,
          "temporal forward requires an audio embedding (mask it rather than omitting it)");
    if (cfg_.intra_clip_after_audio) {
      feat = (*b.audio)(feat, *ctx.audio, ctx.mask_audio);
      feat = (*b.intra)(feat);
    } else {
      feat = (*b.intra)(feat);
      feat = (*b.audio)(feat, *ctx.audio, ctx.mask_audio);
    }
  }

  return from_tokens(feat, h, w);
}

Tensor UNet::forward(const Tensor& x, const Tensor& temb, const UNetContext& ctx) const {
  const Shape& s = x.shape();
  check(s.size() == 4, ErrorCode::ShapeMismatch, "unet input must be [N,C,h,w]");
  check(s[1] == cfg_.latent_channels && s[2] == cfg_.latent_height && s[3] == cfg_.latent_width,
        ErrorCode::ShapeMismatch, "unet input does not match configured latent dims");
  if (temporal_audio_)
    check(s[0] == cfg_.clip_len, ErrorCode::ShapeMismatch,
          "temporal layers require exactly clip_len frames per forward");

  int levels = static_cast<int>(cfg_.unet_channel_schedule.size());
  Tensor h = conv_in_(x);

  std::vector<Tensor> skips;
  int id = 0;
  for (int l = 0; l < levels; ++l) {
    h = run_block(id++, h, temb, ctx);
    skips.push_back(h);
    if (l + 1 < levels) h = downs_[l](h);
  }
  h = run_block(id++, h, temb, ctx);  // mid
  for (int l = levels - 1; l >= 0; --l) {
    h = run_block(id++, concat({h, skips[l]}, 1), temb, ctx);
    if (l > 0) h = ups_[levels - 1 - l](upsample_nearest2x(h));
  }

  if (final_conv_) h = conv_out_(silu(gn_out_(h)));
  return h;
}

}  // namespace avdiff
