#pragma once

#include <string>
#include <vector>

namespace avdiff {

/// Mono audio in [-1, 1] doubles.
struct AudioTrack {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return sample_rate > 0 ? double(samples.size()) / sample_rate : 0.0;
  }
};

/// Reads a 16-bit PCM mono RIFF/WAVE file.
AudioTrack read_wav(const std::string& path);

/// Writes samples (clamped to [-1, 1]) as 16-bit PCM mono.
void write_wav(const std::string& path, const AudioTrack& track);

}  // namespace avdiff
