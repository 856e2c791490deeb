#pragma once

#include <string>
#include <vector>

#include "avdiff/motion_features.hpp"
#include "avdiff/tensor.hpp"
#include "avdiff/wav_io.hpp"

namespace avdiff {

// One procedurally generated talking-head clip: grayscale frames, a matched
// audio track whose loudness envelope drives the mouth, and the exact facial
// keypoints used to draw each frame.
struct SyntheticVideo {
  std::vector<Tensor> frames;  // each [S, S], pixel values in [0, 1]
  AudioTrack audio;            // 16 kHz mono
  KeypointSequence keypoints;  // one record per frame
  std::vector<double> mouth_aperture;  // per frame, in [0, 1]
  std::vector<double> audio_envelope;  // envelope sampled at frame times
};

struct SyntheticDataset {
  std::vector<SyntheticVideo> videos;
  double fps = 25.0;
  int image_size = 64;
  uint64_t seed = 0;
};

// Deterministic: the same (seed, index) pair always yields the same video.
SyntheticVideo synth_video(uint64_t seed, uint64_t index, int n_frames, double fps,
                           int image_size);

SyntheticDataset synth_dataset(uint64_t seed, int n_videos, int n_frames, double fps,
                               int image_size);

// Lays out dir/manifest.json plus video_%03d/{frame_%05d.png, audio.wav,
// keypoints.jsonl}. Pixel data is quantized to 8-bit on write.
void write_dataset(const std::string& dir, const SyntheticDataset& ds);

SyntheticDataset load_dataset(const std::string& dir);

// Pearson correlation of two equally long series.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace avdiff
