#include "avdiff/audio_to_latents.hpp"

#include <cmath>

#include "avdiff/errors.hpp"

namespace avdiff {

const char* condition_tag_name(ConditionTag tag) {
  switch (tag) {
    case ConditionTag::Audio: return "audio";
    case ConditionTag::HeadMove: return "head_move";
    case ConditionTag::Expression: return "expression";
  }
  raise(ErrorCode::UnknownConditionTag, "unhandled condition tag");
}

MotionLatentBank::MotionLatentBank(nn::ParamStore& ps, const std::string& prefix,
                                   const ModelConfig& cfg, Rng& rng)
    : embeddings_(ps.add(prefix + ".embeddings",
                         Tensor::randn({cfg.n_learnable_embeddings, cfg.qkv_dim}, rng,
                                       1.0 / std::sqrt(double(cfg.qkv_dim))))),
      q_audio_(ps, prefix + ".q_audio", cfg.audio_feature_dim, cfg.qkv_dim, rng),
      q_move_(ps, prefix + ".q_move", 1, cfg.qkv_dim, rng),
      q_expr_(ps, prefix + ".q_expr", 1, cfg.qkv_dim, rng),
      k_proj_(ps, prefix + ".k", cfg.qkv_dim, cfg.qkv_dim, rng),
      v_proj_(ps, prefix + ".v", cfg.qkv_dim, cfg.qkv_dim, rng),
      out_proj_(ps, prefix + ".out", cfg.qkv_dim, cfg.time_embed_dim, rng, nn::Init::Zero),
      qkv_dim_(cfg.qkv_dim),
      attention_pooling_(cfg.audio_pooling == "attention") {
  if (attention_pooling_)
    pool_query_ = ps.add(prefix + ".pool_query",
                         Tensor::randn({cfg.audio_feature_dim}, rng,
                                       1.0 / std::sqrt(double(cfg.audio_feature_dim))));
}

Tensor MotionLatentBank::attend(const Tensor& query) const {
  check(query.shape() == Shape{qkv_dim_}, ErrorCode::ShapeMismatch,
        "motion-latent query must be [qkv_dim]");
  Tensor q = reshape(query, {1, qkv_dim_});
  Tensor keys = k_proj_(embeddings_);    // [n_emb, qkv]
  Tensor values = v_proj_(embeddings_);  // [n_emb, qkv]
  Tensor scores = scale(matmul(q, permute(keys, {1, 0})), 1.0 / std::sqrt(double(qkv_dim_)));
  Tensor attn = matmul(softmax_lastdim(scores), values);  // [1, qkv]
  Tensor out = out_proj_(attn);                           // [1, time_embed_dim]
  return reshape(out, {out.shape()[1]});
}

Tensor MotionLatentBank::from_audio(const Tensor& audio_embed) const {
  const Shape& s = audio_embed.shape();
  check(s.size() == 3, ErrorCode::ShapeMismatch, "audio embedding must be [F,5,A]");
  Tensor tokens = reshape(audio_embed, {s[0] * s[1], s[2]});  // [F*5, A]
  Tensor pooled;
  if (attention_pooling_) {
    // learned pooling: softmax(tokens . pool_query / sqrt(A)) weights
    Tensor logits = scale(matmul(tokens, reshape(pool_query_, {s[2], 1})),
                          1.0 / std::sqrt(double(s[2])));      // [F*5, 1]
    Tensor weights = softmax_lastdim(permute(logits, {1, 0}));  // [1, F*5]
    pooled = reshape(matmul(weights, tokens), {s[2]});          // [A]
  } else {
    pooled = mean_axis0(tokens);  // [A]
  }
  return attend(q_audio_(pooled));
}

Tensor MotionLatentBank::from_scalar(ConditionTag tag, double value) const {
  check(tag == ConditionTag::HeadMove || tag == ConditionTag::Expression,
        ErrorCode::UnknownConditionTag, "scalar path accepts head_move or expression only");
  check(std::isfinite(value) && value >= 0.0, ErrorCode::InvalidConfig,
        "motion-variance condition must be a finite non-negative scalar");
  // variances are heavy-tailed; compress before the linear map
  Tensor x = Tensor::from({1}, {std::log1p(value)});
  const nn::Linear& proj = tag == ConditionTag::HeadMove ? q_move_ : q_expr_;
  return attend(proj(x));
}

Tensor MotionLatentBank::from_bundle(ConditionTag tag, const ConditionBundle& cond) const {
  switch (tag) {
    case ConditionTag::Audio: return from_audio(cond.audio_embed);
    case ConditionTag::HeadMove: return from_scalar(tag, cond.head_move_var);
    case ConditionTag::Expression: return from_scalar(tag, cond.expr_var);
  }
  raise(ErrorCode::UnknownConditionTag, "unhandled condition tag");
}

ConditionTag sample_training_condition(Rng& rng) {
  switch (rng.uniform_int(0, 2)) {
    case 0: return ConditionTag::Audio;
    case 1: return ConditionTag::HeadMove;
    default: return ConditionTag::Expression;
  }
}

}  // namespace avdiff
