#pragma once

#include "avdiff/config.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff {

/// Non-learned stand-in for a latent-image codec over square grayscale
/// images. Encode is space-to-depth patchify into p*p phase planes
/// (p = image_size / latent_height), then a mean over contiguous groups of
/// p*p/C phases to reach [C, h, w]. Decode broadcasts each channel back to
/// its phase group, so encode(decode(z)) == z (decode-then-encode is exact;
/// encode-then-decode is the lossy direction, a per-group smoothing).
/// Pixels in [0, 1] map affinely to latent values in [-1, 1].
class LatentCodec {
 public:
  LatentCodec(int image_size, int latent_channels, int latent_height, int latent_width);

  /// image: [S, S] pixels in [0, 1] -> latent [C, h, w].
  Tensor encode(const Tensor& image) const;

  /// latent [C, h, w] -> image [S, S]; values may exceed [0, 1] for
  /// out-of-range latents (quantize/clamp at the pixel sink, not here).
  Tensor decode(const Tensor& latent) const;

  int image_size() const { return image_size_; }
  int patch() const { return patch_; }
  int phases_per_channel() const { return phases_per_channel_; }

 private:
  int image_size_, channels_, height_, width_;
  int patch_;               // p = S / h
  int phases_per_channel_;  // p*p / C
};

}  // namespace avdiff
