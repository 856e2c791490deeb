#include "avdiff/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <png.h>

#include "avdiff/errors.hpp"

namespace avdiff {

GrayImage read_png_gray(const std::string& path) {
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&pi, path.c_str()))
    raise(ErrorCode::IoError, "cannot read png: " + path + " (" + pi.message + ")");
  pi.format = PNG_FORMAT_GRAY;
  GrayImage img;
  img.width = static_cast<int>(pi.width);
  img.height = static_cast<int>(pi.height);
  img.pixels.resize(PNG_IMAGE_SIZE(pi));
  if (!png_image_finish_read(&pi, nullptr, img.pixels.data(), 0, nullptr)) {
    std::string msg = pi.message;
    png_image_free(&pi);
    raise(ErrorCode::IoError, "cannot decode png: " + path + " (" + msg + ")");
  }
  return img;
}

void write_png_gray(const std::string& path, const GrayImage& img) {
  check(img.width > 0 && img.height > 0, ErrorCode::NonPositiveDim,
        "png dimensions must be positive");
  check(img.pixels.size() == size_t(img.width) * size_t(img.height), ErrorCode::ShapeMismatch,
        "pixel buffer size does not match dimensions");
  png_image pi;
  std::memset(&pi, 0, sizeof(pi));
  pi.version = PNG_IMAGE_VERSION;
  pi.width = static_cast<png_uint_32>(img.width);
  pi.height = static_cast<png_uint_32>(img.height);
  pi.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&pi, path.c_str(), 0, img.pixels.data(), 0, nullptr))
    raise(ErrorCode::IoError, "cannot write png: " + path + " (" + pi.message + ")");
}

GrayImage quantize_image(const Tensor& image) {
  const Shape& sh = image.shape();
  check(sh.size() == 2, ErrorCode::ShapeMismatch, "quantize_image expects a rank-2 [H,W] tensor");
  GrayImage img;
  img.height = sh[0];
  img.width = sh[1];
  img.pixels.resize(size_t(sh[0]) * sh[1]);
  const auto& d = image.data();
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    double v = std::clamp(d[i], 0.0, 1.0);
    img.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
  }
  return img;
}

Tensor dequantize_image(const GrayImage& img) {
  Tensor t = Tensor::zeros({img.height, img.width});
  auto& d = t.data();
  for (size_t i = 0; i < img.pixels.size(); ++i) d[i] = double(img.pixels[i]) / 255.0;
  return t;
}

}  // namespace avdiff
