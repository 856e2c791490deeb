#pragma once

#include "avdiff/config.hpp"
#include "avdiff/nn.hpp"
#include "avdiff/types.hpp"

namespace avdiff {

/// Which conditioning signal drives the motion latent. Training draws one
/// of the three uniformly; inference always uses Audio.
enum class ConditionTag { Audio, HeadMove, Expression };

const char* condition_tag_name(ConditionTag tag);

/// Maps an audio embedding or a motion-variance scalar into a shared
/// motion-latent space: the condition becomes a single query token that
/// attends over a bank of learnable embeddings; the attended value is
/// projected to time_embed_dim and added to the timestep embedding by the
/// caller. The output projection is zero-initialized so a freshly added
/// bank contributes nothing until trained.
class MotionLatentBank {
 public:
  MotionLatentBank(nn::ParamStore& ps, const std::string& prefix, const ModelConfig& cfg,
                   Rng& rng);

  /// audio_embed [F, 5, audio_feature_dim], mean-pooled to one query token.
  Tensor from_audio(const Tensor& audio_embed) const;

  /// HeadMove / Expression scalar (log1p-compressed before projection).
  Tensor from_scalar(ConditionTag tag, double value) const;

  /// Dispatches on the tag using the bundle's fields.
  Tensor from_bundle(ConditionTag tag, const ConditionBundle& cond) const;

  const Tensor& embeddings() const { return embeddings_; }

 private:
  Tensor attend(const Tensor& query) const;  // [qkv_dim] -> [time_embed_dim]

  Tensor embeddings_;  // [n_learnable_embeddings, qkv_dim]
  nn::Linear q_audio_, q_move_, q_expr_;
  nn::Linear k_proj_, v_proj_, out_proj_;
  int qkv_dim_ = 0;
  bool attention_pooling_ = false;
  Tensor pool_query_;  // [audio_feature_dim]; only with attention pooling
};

/// Uniform draw over the three condition tags (training time).
ConditionTag sample_training_condition(Rng& rng);

}  // namespace avdiff
