#pragma once

#include <string>

#include "avdiff/diffusion.hpp"

namespace avdiff {

struct InferenceRequest {
  std::string checkpoint_path;  // stage-2 checkpoint
  std::string ref_image_path;   // grayscale PNG, image_size x image_size
  std::string audio_path;       // 16 kHz mono PCM16 WAV
  std::string out_dir;
  double seconds = 0.0;  // 0 = cover the whole audio track
  int ddim_steps = 25;
  CfgRatios ratios;   // audio 5, reference 3
  uint64_t seed = 0;  // sampling-noise seed
};

struct InferenceResult {
  int n_frames = 0;
  int n_clips = 0;
  std::string manifest_path;
};

// Loads the checkpoint (must be stage 2; every parameter covered), encodes
// the reference image, extracts audio features with the model's own feature
// seed, runs the autoregressive sampler, and writes out_dir/frame_%05d.png
// plus a manifest.json recording the run provenance.
InferenceResult run_inference(const InferenceRequest& req);

}  // namespace avdiff
