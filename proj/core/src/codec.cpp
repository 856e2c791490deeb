#include "avdiff/codec.hpp"

#include "avdiff/errors.hpp"

namespace avdiff {

LatentCodec::LatentCodec(int image_size, int latent_channels, int latent_height, int latent_width)
    : image_size_(image_size),
      channels_(latent_channels),
      height_(latent_height),
      width_(latent_width) {
  check(image_size > 0 && latent_channels > 0 && latent_height > 0 && latent_width > 0,
        ErrorCode::NonPositiveDim, "codec dimensions must be positive");
  check(latent_height == latent_width, ErrorCode::InvalidConfig,
        "codec expects square latents (h == w)");
  check(image_size % latent_height == 0, ErrorCode::InvalidConfig,
        "image_size must be divisible by latent_height");
  patch_ = image_size / latent_height;
  int phases = patch_ * patch_;
  check(phases % latent_channels == 0, ErrorCode::InvalidConfig,
        "patch area (" + std::to_string(phases) + ") must be divisible by latent_channels");
  phases_per_channel_ = phases / latent_channels;
}

Tensor LatentCodec::encode(const Tensor& image) const {
  check(image.shape() == Shape{image_size_, image_size_}, ErrorCode::ShapeMismatch,
        "codec expects a square [" + std::to_string(image_size_) + "," +
            std::to_string(image_size_) + "] grayscale image");
  Tensor z = Tensor::zeros({channels_, height_, width_});
  const auto& px = image.data();
  auto& out = z.data();
  int p = patch_;
  double inv = 1.0 / phases_per_channel_;
  for (int c = 0; c < channels_; ++c)
    for (int i = 0; i < height_; ++i)
      for (int j = 0; j < width_; ++j) {
        double acc = 0.0;
        for (int q = c * phases_per_channel_; q < (c + 1) * phases_per_channel_; ++q) {
          int dy = q / p, dx = q % p;
          acc += px[size_t(i * p + dy) * image_size_ + size_t(j * p + dx)];
        }
        // pixel mean in [0,1] -> latent in [-1,1]
        out[(size_t(c) * height_ + i) * width_ + j] = 2.0 * (acc * inv) - 1.0;
      }
  return z;
}

Tensor LatentCodec::decode(const Tensor& latent) const {
  check(latent.shape() == Shape{channels_, height_, width_}, ErrorCode::ShapeMismatch,
        "codec expects a [" + std::to_string(channels_) + "," + std::to_string(height_) + "," +
            std::to_string(width_) + "] latent");
  Tensor img = Tensor::zeros({image_size_, image_size_});
  const auto& z = latent.data();
  auto& px = img.data();
  int p = patch_;
  for (int c = 0; c < channels_; ++c)
    for (int i = 0; i < height_; ++i)
      for (int j = 0; j < width_; ++j) {
        double v = z[(size_t(c) * height_ + i) * width_ + j] * 0.5 + 0.5;
        for (int q = c * phases_per_channel_; q < (c + 1) * phases_per_channel_; ++q) {
          int dy = q / p, dx = q % p;
          px[size_t(i * p + dy) * image_size_ + size_t(j * p + dx)] = v;
        }
      }
  return img;
}

}  // namespace avdiff
