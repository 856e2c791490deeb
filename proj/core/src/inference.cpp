#include "avdiff/inference.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "avdiff/audio.hpp"
#include "avdiff/checkpoint.hpp"
#include "avdiff/codec.hpp"
#include "avdiff/errors.hpp"
#include "avdiff/hash.hpp"
#include "avdiff/image_io.hpp"
#include "avdiff/model.hpp"

namespace avdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

InferenceResult run_inference(const InferenceRequest& req) {
  check(req.ddim_steps > 0, ErrorCode::InvalidConfig, "sampler needs at least one step");

  Checkpoint ck = load_checkpoint(req.checkpoint_path);
  check(ck.stage == 2, ErrorCode::CheckpointMismatch,
        "inference needs a stage-2 checkpoint, got stage " + std::to_string(ck.stage));
  const RunConfig& cfg = ck.config;
  const ModelConfig& mc = cfg.model;

  DiffusionModel model(mc, /*temporal_audio=*/true, mc.seed);
  apply_checkpoint(ck, model.params(), /*strict=*/true);

  GrayImage ref_img = read_png_gray(req.ref_image_path);
  check(ref_img.width == cfg.data.image_size && ref_img.height == cfg.data.image_size,
        ErrorCode::ShapeMismatch,
        "reference image must be " + std::to_string(cfg.data.image_size) + "x" +
            std::to_string(cfg.data.image_size));
  LatentCodec codec(cfg.data.image_size, mc.latent_channels, mc.latent_height, mc.latent_width);
  Tensor ref_latent = codec.encode(dequantize_image(ref_img));

  AudioTrack audio = read_wav(req.audio_path);
  AudioFeatureExtractor ex;
  ex.feature_dim = mc.audio_feature_dim;
  ex.seed = mc.seed;  // must match the features the model trained on
  Tensor windows = extract_audio_embedding(ex, audio, cfg.data.fps);

  double seconds = req.seconds > 0.0 ? req.seconds : audio.duration_seconds();
  check(seconds > 0.0, ErrorCode::InvalidConfig, "requested duration must be positive");
  int want = int(std::ceil(seconds * cfg.data.fps));
  int n_clips = (want + mc.clip_len - 1) / mc.clip_len;
  int n_frames = n_clips * mc.clip_len;

  DiffusionSchedule sched = DiffusionSchedule::linear(mc.noise_steps);
  Rng rng = Rng::keyed(req.seed, 0x73616d706c65ull);
  std::vector<Tensor> clips = generate_long_video(model, sched, ref_latent, windows, n_clips,
                                                  req.ddim_steps, req.ratios, rng);

  std::error_code ec;
  fs::create_directories(req.out_dir, ec);
  if (ec) raise(ErrorCode::IoError, "cannot create output directory: " + req.out_dir);
  int frame_no = 0;
  for (const Tensor& clip : clips) {
    for (int i = 0; i < mc.clip_len; ++i) {
      Tensor latent = reshape(slice(clip, 0, i, 1),
                              {mc.latent_channels, mc.latent_height, mc.latent_width});
      char name[32];
      std::snprintf(name, sizeof(name), "frame_%05d.png", frame_no++);
      write_png_gray((fs::path(req.out_dir) / name).string(),
                     quantize_image(codec.decode(latent)));
    }
  }

  json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["seed"] = req.seed;
  manifest["checkpoint_sha256"] = file_sha256(req.checkpoint_path);
  manifest["fps"] = cfg.data.fps;
  manifest["clip_len"] = mc.clip_len;
  manifest["n_frames"] = n_frames;
  manifest["n_clips"] = n_clips;
  manifest["ddim_steps"] = req.ddim_steps;
  manifest["audio_ratio"] = req.ratios.audio;
  manifest["ref_ratio"] = req.ratios.ref;
  std::string manifest_path = (fs::path(req.out_dir) / "manifest.json").string();
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write run manifest");
  out << manifest.dump(2) << "\n";
  if (!out) raise(ErrorCode::IoError, "short write to run manifest");

  InferenceResult res;
  res.n_frames = n_frames;
  res.n_clips = n_clips;
  res.manifest_path = manifest_path;
  return res;
}

}  // namespace avdiff
