#pragma once

#include <vector>

#include "avdiff/tensor.hpp"
#include "avdiff/wav_io.hpp"

namespace avdiff {

/// Deterministic audio feature extractor: log-mel filterbank (64 bands,
/// 25 ms window, hop = 1/fps) followed by a fixed seed-keyed random
/// projection to `feature_dim`. The stand-in for a pretrained speech
/// encoder; any extractor producing [n_video_frames, feature_dim] can
/// replace it behind the same call.
struct AudioFeatureExtractor {
  int feature_dim = 16;
  uint64_t seed = 0;

  static constexpr int kSupportedRate = 16000;
  static constexpr int kMelBands = 64;
  static constexpr double kWindowSeconds = 0.025;

  /// One feature row per video frame at `fps`.
  /// Throws EmptyAudio on an empty track and UnsupportedSampleRate unless
  /// the track is at 16 kHz (resample upstream).
  Tensor per_frame_features(const AudioTrack& track, double fps) const;
};

/// Stacks each frame's features with its two predecessors and two successors
/// (edge-clamped): [n, D] -> [n, 5, D] with row f centered on features[f].
Tensor window_stack(const Tensor& features);

/// per_frame_features followed by window_stack: [n_video_frames, 5, D].
Tensor extract_audio_embedding(const AudioFeatureExtractor& ex, const AudioTrack& track,
                               double fps);

/// In-place radix-2 FFT over interleaved (re, im) pairs; n must be a power
/// of two. Exposed for tests.
void fft_radix2(std::vector<double>& re, std::vector<double>& im);

}  // namespace avdiff
