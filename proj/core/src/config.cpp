#include "avdiff/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "avdiff/errors.hpp"
#include "avdiff/hash.hpp"

namespace avdiff {

using json = nlohmann::ordered_json;

RunConfig toy_preset() {
  RunConfig cfg;  // defaults are the toy scale
  return cfg;
}

RunConfig full_scale_preset() {
  RunConfig cfg;
  cfg.model.clip_len = 12;
  cfg.model.motion_frame_len = 124;
  cfg.model.tsm_stride = 4;
  cfg.model.tsm_expand_ratio = 2;
  cfg.model.tsm_segments = 5;
  cfg.model.latent_channels = 4;
  cfg.model.latent_height = 8;
  cfg.model.latent_width = 8;
  cfg.model.audio_feature_dim = 32;
  cfg.model.n_learnable_embeddings = 128;
  cfg.model.qkv_dim = 256;
  cfg.model.time_embed_dim = 1280;
  cfg.model.unet_channel_schedule = {32, 64};
  cfg.model.attention_heads = 8;
  cfg.model.noise_steps = 1000;
  cfg.train.lr = 1e-5;
  cfg.train.batch_size = 24;
  return cfg;
}

int64_t tsm_coverage(int s, int r, int n_seg) {
  int64_t sum = 0;
  int64_t seg = s;
  for (int i = 0; i < n_seg; ++i) {
    sum += seg;
    if (sum > (int64_t(1) << 50)) return sum;  // saturate well past any plausible M
    seg *= r;
  }
  return sum;
}

ModelConfig validate_config(const ModelConfig& cfg) {
  std::vector<std::string> violations;
  std::vector<ErrorCode> codes;
  auto add = [&](ErrorCode code, const std::string& msg) {
    codes.push_back(code);
    violations.push_back(msg);
  };

  auto positive = [&](int v, const char* name) {
    if (v <= 0) add(ErrorCode::NonPositiveDim, std::string(name) + " must be positive, got " +
                                                   std::to_string(v));
  };
  positive(cfg.clip_len, "clip_len");
  if (cfg.motion_frame_len < 0)
    add(ErrorCode::NonPositiveDim,
        "motion_frame_len must be >= 0, got " + std::to_string(cfg.motion_frame_len));
  positive(cfg.tsm_stride, "tsm_stride");
  positive(cfg.tsm_expand_ratio, "tsm_expand_ratio");
  positive(cfg.tsm_segments, "tsm_segments");
  positive(cfg.latent_channels, "latent_channels");
  positive(cfg.latent_height, "latent_height");
  positive(cfg.latent_width, "latent_width");
  positive(cfg.audio_feature_dim, "audio_feature_dim");
  positive(cfg.n_learnable_embeddings, "n_learnable_embeddings");
  positive(cfg.qkv_dim, "qkv_dim");
  positive(cfg.time_embed_dim, "time_embed_dim");
  positive(cfg.attention_heads, "attention_heads");
  positive(cfg.noise_steps, "noise_steps");
  if (cfg.unet_channel_schedule.empty())
    add(ErrorCode::NonPositiveDim, "unet_channel_schedule must not be empty");
  for (int c : cfg.unet_channel_schedule) positive(c, "unet_channel_schedule entry");

  if (cfg.tsm_stride > 0 && cfg.tsm_expand_ratio > 0 && cfg.tsm_segments > 0) {
    int64_t cov = tsm_coverage(cfg.tsm_stride, cfg.tsm_expand_ratio, cfg.tsm_segments);
    if (cov > cfg.motion_frame_len)
      add(ErrorCode::ScheduleOverrun,
          "segment schedule covers " + std::to_string(cov) + " raw frames but motion_frame_len is " +
              std::to_string(cfg.motion_frame_len));
  }

  for (int c : cfg.unet_channel_schedule)
    if (c > 0 && cfg.attention_heads > 0 && c % cfg.attention_heads != 0)
      add(ErrorCode::InvalidConfig, "unet channel " + std::to_string(c) +
                                        " not divisible by attention_heads " +
                                        std::to_string(cfg.attention_heads));
  int levels = static_cast<int>(cfg.unet_channel_schedule.size());
  int div = 1 << (levels > 0 ? levels - 1 : 0);
  if (cfg.latent_height > 0 && cfg.latent_width > 0 &&
      (cfg.latent_height % div != 0 || cfg.latent_width % div != 0))
    add(ErrorCode::InvalidConfig,
        "latent spatial dims must be divisible by 2^(levels-1) = " + std::to_string(div));

  if (cfg.audio_pooling != "mean" && cfg.audio_pooling != "attention")
    add(ErrorCode::InvalidConfig,
        "audio_pooling must be \"mean\" or \"attention\", got \"" + cfg.audio_pooling + "\"");

  if (!violations.empty()) throw ConfigValidationError(codes.front(), std::move(violations));
  return cfg;
}

namespace {

void check_known_keys(const json& j, const std::vector<std::string>& known,
                      const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : known) ok = ok || it.key() == k;
    if (!ok)
      raise(ErrorCode::ParseError, "unknown config key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json model_to_json(const ModelConfig& m) {
  return json{{"clip_len", m.clip_len},
              {"motion_frame_len", m.motion_frame_len},
              {"tsm_stride", m.tsm_stride},
              {"tsm_expand_ratio", m.tsm_expand_ratio},
              {"tsm_segments", m.tsm_segments},
              {"latent_channels", m.latent_channels},
              {"latent_height", m.latent_height},
              {"latent_width", m.latent_width},
              {"audio_feature_dim", m.audio_feature_dim},
              {"n_learnable_embeddings", m.n_learnable_embeddings},
              {"qkv_dim", m.qkv_dim},
              {"time_embed_dim", m.time_embed_dim},
              {"unet_channel_schedule", m.unet_channel_schedule},
              {"attention_heads", m.attention_heads},
              {"noise_steps", m.noise_steps},
              {"seed", m.seed},
              {"intra_clip_after_audio", m.intra_clip_after_audio},
              {"audio_pooling", m.audio_pooling}};
}

ModelConfig model_from_json(const json& j) {
  static const std::vector<std::string> keys = {
      "clip_len",       "motion_frame_len", "tsm_stride",
      "tsm_expand_ratio", "tsm_segments",   "latent_channels",
      "latent_height",  "latent_width",     "audio_feature_dim",
      "n_learnable_embeddings", "qkv_dim",  "time_embed_dim",
      "unet_channel_schedule", "attention_heads", "noise_steps", "seed",
      "intra_clip_after_audio", "audio_pooling"};
  check_known_keys(j, keys, "model section");
  ModelConfig m;
  read_field(j, "clip_len", m.clip_len);
  read_field(j, "motion_frame_len", m.motion_frame_len);
  read_field(j, "tsm_stride", m.tsm_stride);
  read_field(j, "tsm_expand_ratio", m.tsm_expand_ratio);
  read_field(j, "tsm_segments", m.tsm_segments);
  read_field(j, "latent_channels", m.latent_channels);
  read_field(j, "latent_height", m.latent_height);
  read_field(j, "latent_width", m.latent_width);
  read_field(j, "audio_feature_dim", m.audio_feature_dim);
  read_field(j, "n_learnable_embeddings", m.n_learnable_embeddings);
  read_field(j, "qkv_dim", m.qkv_dim);
  read_field(j, "time_embed_dim", m.time_embed_dim);
  read_field(j, "unet_channel_schedule", m.unet_channel_schedule);
  read_field(j, "attention_heads", m.attention_heads);
  read_field(j, "noise_steps", m.noise_steps);
  read_field(j, "seed", m.seed);
  read_field(j, "intra_clip_after_audio", m.intra_clip_after_audio);
  read_field(j, "audio_pooling", m.audio_pooling);
  return m;
}

}  // namespace

std::string config_to_json(const RunConfig& cfg) {
  json j = model_to_json(cfg.model);
  j["train"] = json{{"lr", cfg.train.lr},
                    {"weight_decay", cfg.train.weight_decay},
                    {"batch_size", cfg.train.batch_size},
                    {"steps", cfg.train.steps},
                    {"log_every", cfg.train.log_every},
                    {"dropout", json{{"audio", cfg.train.dropout.audio},
                                     {"motion_latents", cfg.train.dropout.motion_latents},
                                     {"ref_drop", cfg.train.dropout.ref_drop},
                                     {"mf_mask", cfg.train.dropout.mf_mask}}}};
  j["data"] = json{{"fps", cfg.data.fps}, {"image_size", cfg.data.image_size}};
  return j.dump(2);
}

RunConfig parse_config_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    raise(ErrorCode::ParseError, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) raise(ErrorCode::ParseError, "config root must be a JSON object");

  // Model fields live at the top level; train/data are optional sections.
  json model_part = j;
  model_part.erase("train");
  model_part.erase("data");

  RunConfig cfg;
  cfg.model = model_from_json(model_part);

  if (j.contains("train")) {
    const json& t = j.at("train");
    check_known_keys(t, {"lr", "weight_decay", "batch_size", "steps", "log_every", "dropout"},
                     "train section");
    read_field(t, "lr", cfg.train.lr);
    read_field(t, "weight_decay", cfg.train.weight_decay);
    read_field(t, "batch_size", cfg.train.batch_size);
    read_field(t, "steps", cfg.train.steps);
    read_field(t, "log_every", cfg.train.log_every);
    if (t.contains("dropout")) {
      const json& d = t.at("dropout");
      check_known_keys(d, {"audio", "motion_latents", "ref_drop", "mf_mask"}, "dropout section");
      read_field(d, "audio", cfg.train.dropout.audio);
      read_field(d, "motion_latents", cfg.train.dropout.motion_latents);
      read_field(d, "ref_drop", cfg.train.dropout.ref_drop);
      read_field(d, "mf_mask", cfg.train.dropout.mf_mask);
    }
  }
  if (j.contains("data")) {
    const json& d = j.at("data");
    check_known_keys(d, {"fps", "image_size"}, "data section");
    read_field(d, "fps", cfg.data.fps);
    read_field(d, "image_size", cfg.data.image_size);
  }

  validate_config(cfg.model);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_json(ss.str());
}

void save_config_file(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write config file: " + path);
  out << config_to_json(cfg) << "\n";
}

std::string config_hash(const RunConfig& cfg) { return sha256_hex(config_to_json(cfg)); }

}  // namespace avdiff
