#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace avdiff {

/// Architecture and schedule hyperparameters shared by every module.
struct ModelConfig {
  int clip_len = 4;            // F: frames generated per clip
  int motion_frame_len = 14;   // M: raw preceding-frame buffer length
  int tsm_stride = 2;          // s: abstracted frames per segment
  int tsm_expand_ratio = 2;    // r: segment growth factor
  int tsm_segments = 3;        // number of segments
  int latent_channels = 4;
  int latent_height = 8;
  int latent_width = 8;
  int audio_feature_dim = 16;
  int n_learnable_embeddings = 16;
  int qkv_dim = 32;
  int time_embed_dim = 64;
  std::vector<int> unet_channel_schedule = {16, 32};
  int attention_heads = 4;
  int noise_steps = 1000;  // T
  uint64_t seed = 0;
  // Layer order inside each attention block: intra-clip temporal attention
  // after (default) or before the audio cross-attention.
  bool intra_clip_after_audio = true;
  // How the F x 5 audio window tokens collapse to the motion-latent bank's
  // single query token: "mean" or "attention" (learned pooling query).
  std::string audio_pooling = "mean";

  int tsm_slots() const { return tsm_stride * tsm_segments; }
  bool operator==(const ModelConfig&) const = default;
};

/// Training-time condition mask/drop probabilities.
struct DropoutRates {
  double audio = 0.10;
  double motion_latents = 0.10;
  double ref_drop = 0.15;
  double mf_mask = 0.40;
  bool operator==(const DropoutRates&) const = default;
};

struct TrainConfig {
  double lr = 2e-3;
  double weight_decay = 0.01;
  int batch_size = 4;
  int steps = 200;
  int log_every = 10;
  DropoutRates dropout;
  bool operator==(const TrainConfig&) const = default;
};

struct DataConfig {
  double fps = 25.0;
  int image_size = 64;
  bool operator==(const DataConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DataConfig data;
  bool operator==(const RunConfig&) const = default;
};

/// CPU-minutes preset: exercises every code path at desk scale.
RunConfig toy_preset();

/// Hyperparameters at the published scale (F=12, M=124, s=4, r=2, 5 segments,
/// 128 learnable embeddings, 256 qkv channels, 1280 time-embedding channels).
RunConfig full_scale_preset();

/// Total raw motion frames covered by the segment schedule: sum of s*r^(i-1).
int64_t tsm_coverage(int s, int r, int n_seg);

/// Returns cfg unchanged iff every invariant holds; otherwise throws
/// ConfigValidationError listing all violations.
ModelConfig validate_config(const ModelConfig& cfg);

/// Strict JSON config IO: unknown keys anywhere are an error.
RunConfig load_config_file(const std::string& path);
RunConfig parse_config_json(const std::string& text);
std::string config_to_json(const RunConfig& cfg);
void save_config_file(const RunConfig& cfg, const std::string& path);

/// Stable content hash of the config (hex), recorded in run manifests.
std::string config_hash(const RunConfig& cfg);

}  // namespace avdiff
