#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avdiff/tensor.hpp"

namespace avdiff {

/// 8-bit grayscale image buffer, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;
};

GrayImage read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const GrayImage& img);

/// [H, W] doubles in [0, 1] <-> 8-bit grayscale (clamped, round-to-nearest).
GrayImage quantize_image(const Tensor& image);
Tensor dequantize_image(const GrayImage& img);

}  // namespace avdiff
