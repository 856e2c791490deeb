#include "avdiff/audio.hpp"

#include <algorithm>
#include <cmath>

#include "avdiff/errors.hpp"
#include "avdiff/rng.hpp"

namespace avdiff {

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
  size_t n = re.size();
  check(n == im.size() && n > 0 && (n & (n - 1)) == 0, ErrorCode::ShapeMismatch,
        "fft length must be a power of two");
  // bit-reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(re[i], re[j]);
      std::swap(im[i], im[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = -2.0 * M_PI / double(len);
    double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cr = 1.0, ci = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        size_t a = i + k, b = i + k + len / 2;
        double tr = re[b] * cr - im[b] * ci;
        double ti = re[b] * ci + im[b] * cr;
        re[b] = re[a] - tr;
        im[b] = im[a] - ti;
        re[a] += tr;
        im[a] += ti;
        double ncr = cr * wr - ci * wi;
        ci = cr * wi + ci * wr;
        cr = ncr;
      }
    }
  }
}

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// Triangular mel filterbank over FFT bins [0, n_fft/2].
std::vector<std::vector<double>> mel_filterbank(int n_bands, int n_fft, int sample_rate) {
  int n_bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(0.0);
  double mel_hi = hz_to_mel(sample_rate / 2.0);
  std::vector<double> centers(n_bands + 2);
  for (int i = 0; i < n_bands + 2; ++i) {
    double mel = mel_lo + (mel_hi - mel_lo) * double(i) / double(n_bands + 1);
    centers[i] = mel_to_hz(mel) * n_fft / sample_rate;  // in fractional bins
  }
  std::vector<std::vector<double>> fb(n_bands, std::vector<double>(n_bins, 0.0));
  for (int m = 0; m < n_bands; ++m) {
    double lo = centers[m], mid = centers[m + 1], hi = centers[m + 2];
    for (int k = 0; k < n_bins; ++k) {
      double v = 0.0;
      if (k > lo && k < mid && mid > lo)
        v = (k - lo) / (mid - lo);
      else if (k >= mid && k < hi && hi > mid)
        v = (hi - k) / (hi - mid);
      if (v > 0) fb[m][k] = v;
    }
  }
  return fb;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

Tensor AudioFeatureExtractor::per_frame_features(const AudioTrack& track, double fps) const {
  check(!track.samples.empty(), ErrorCode::EmptyAudio, "audio track has no samples");
  check(fps > 0.0, ErrorCode::InvalidConfig, "fps must be positive");
  check(track.sample_rate == kSupportedRate, ErrorCode::UnsupportedSampleRate,
        "extractor requires " + std::to_string(kSupportedRate) + " Hz audio, got " +
            std::to_string(track.sample_rate) + " Hz; resample upstream");
  for (double s : track.samples)
    check(std::isfinite(s), ErrorCode::ParseError, "audio track contains non-finite samples");

  int sr = track.sample_rate;
  int win = static_cast<int>(std::lround(kWindowSeconds * sr));
  int n_fft = next_pow2(win);
  int n_frames =
      std::max<int>(1, static_cast<int>(std::llround(double(track.samples.size()) * fps / sr)));

  auto fb = mel_filterbank(kMelBands, n_fft, sr);
  std::vector<double> hann(win);
  for (int i = 0; i < win; ++i) hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (win - 1));

  // fixed random projection: mel bands -> feature_dim, keyed by extractor seed
  Rng proj_rng = Rng::keyed(seed, 0x617564696f /* "audio" */);
  std::vector<double> proj(size_t(kMelBands) * feature_dim);
  double scale = 1.0 / std::sqrt(double(kMelBands));
  for (auto& p : proj) p = proj_rng.normal() * scale;

  Tensor out = Tensor::zeros({n_frames, feature_dim});
  auto& dst = out.data();
  std::vector<double> re(n_fft), im(n_fft), mel(kMelBands);
  for (int f = 0; f < n_frames; ++f) {
    int64_t start = static_cast<int64_t>(std::llround(double(f) * sr / fps));
    std::fill(re.begin(), re.end(), 0.0);
    std::fill(im.begin(), im.end(), 0.0);
    for (int i = 0; i < win; ++i) {
      int64_t s = start + i;
      re[i] = (s >= 0 && s < int64_t(track.samples.size())) ? track.samples[size_t(s)] * hann[i]
                                                            : 0.0;
    }
    fft_radix2(re, im);
    for (int m = 0; m < kMelBands; ++m) {
      double e = 0.0;
      for (int k = 0; k <= n_fft / 2; ++k)
        if (fb[m][k] != 0.0) e += fb[m][k] * (re[k] * re[k] + im[k] * im[k]);
      mel[m] = std::log(e + 1e-10);
    }
    for (int d = 0; d < feature_dim; ++d) {
      double acc = 0.0;
      for (int m = 0; m < kMelBands; ++m) acc += mel[m] * proj[size_t(m) * feature_dim + d];
      dst[size_t(f) * feature_dim + d] = acc;
    }
  }
  return out;
}

Tensor window_stack(const Tensor& features) {
  const Shape& sh = features.shape();
  check(sh.size() == 2 && sh[0] >= 1, ErrorCode::ShapeMismatch,
        "window_stack expects [n_frames, feature_dim] with n_frames >= 1");
  int n = sh[0], d = sh[1];
  Tensor out = Tensor::zeros({n, 5, d});
  const auto& src = features.data();
  auto& dst = out.data();
  for (int f = 0; f < n; ++f)
    for (int o = -2; o <= 2; ++o) {
      int src_f = std::clamp(f + o, 0, n - 1);
      std::copy(src.begin() + size_t(src_f) * d, src.begin() + size_t(src_f + 1) * d,
                dst.begin() + (size_t(f) * 5 + size_t(o + 2)) * d);
    }
  return out;
}

Tensor extract_audio_embedding(const AudioFeatureExtractor& ex, const AudioTrack& track,
                               double fps) {
  return window_stack(ex.per_frame_features(track, fps));
}

}  // namespace avdiff
