#include <doctest.h>

#include <cmath>

#include "avdiff/codec.hpp"
#include "avdiff/errors.hpp"
#include "avdiff/image_io.hpp"
#include "avdiff/rng.hpp"
#include "avdiff/wav_io.hpp"
#include "test_util.hpp"

using namespace avdiff;
using avdiff_test::max_abs_diff;
using avdiff_test::TempDir;

TEST_CASE("codec geometry: patchify factors") {
  LatentCodec c(64, 4, 8, 8);
  CHECK(c.image_size() == 64);
  CHECK(c.patch() == 8);
  CHECK(c.phases_per_channel() == 16);  // 8*8/4
}

TEST_CASE("decode-then-encode is exact (latents are fixed points)") {
  LatentCodec c(64, 4, 8, 8);
  Rng rng(1);
  Tensor z = Tensor::randn({4, 8, 8}, rng);
  Tensor back = c.encode(c.decode(z));
  CHECK(back.shape() == Shape{4, 8, 8});
  CHECK(max_abs_diff(z, back) < 1e-12);
}

TEST_CASE("encode-then-decode is idempotent after one smoothing pass") {
  LatentCodec c(32, 4, 8, 8);
  Rng rng(2);
  // random image in [0,1]
  Tensor img = Tensor::zeros({32, 32});
  for (double& v : img.data()) v = rng.uniform();
  Tensor z1 = c.encode(img);
  Tensor img2 = c.decode(z1);
  Tensor z2 = c.encode(img2);
  CHECK(max_abs_diff(z1, z2) < 1e-12);
}

TEST_CASE("pixel range maps affinely to the latent range") {
  LatentCodec c(16, 4, 4, 4);
  Tensor black = Tensor::zeros({16, 16});
  Tensor white = Tensor::full({16, 16}, 1.0);
  Tensor mid = Tensor::full({16, 16}, 0.5);
  Tensor zb = c.encode(black), zw = c.encode(white), zm = c.encode(mid);
  for (double v : zb.data()) CHECK(v == doctest::Approx(-1.0).epsilon(1e-12));
  for (double v : zw.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : zm.data()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("codec rejects mismatched image sizes") {
  LatentCodec c(64, 4, 8, 8);
  CHECK_THROWS_AS((void)c.encode(Tensor::zeros({32, 32})), Error);
}

TEST_CASE("image quantization round-trips every 8-bit level") {
  // dequantize then quantize must reproduce all 256 codes exactly
  GrayImage img;
  img.width = 16;
  img.height = 16;
  img.pixels.resize(256);
  for (int i = 0; i < 256; ++i) img.pixels[size_t(i)] = uint8_t(i);
  Tensor t = dequantize_image(img);
  CHECK(t.shape() == Shape{16, 16});
  CHECK(t.data()[0] == 0.0);
  CHECK(t.data()[255] == 1.0);
  GrayImage back = quantize_image(t);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("quantization clamps out-of-range values") {
  Tensor t = Tensor::from({1, 3}, {-0.5, 0.5, 1.7});
  GrayImage img = quantize_image(t);
  CHECK(img.pixels[0] == 0);
  CHECK(img.pixels[1] == 128);  // round(0.5*255) = 128 (round half away from zero)
  CHECK(img.pixels[2] == 255);
}

TEST_CASE("PNG write/read round-trips pixel bytes exactly") {
  TempDir tmp("png");
  Rng rng(3);
  GrayImage img;
  img.width = 31;  // odd size exercises filtering edge cases
  img.height = 17;
  img.pixels.resize(size_t(31) * 17);
  for (auto& p : img.pixels) p = uint8_t(rng.uniform_int(0, 255));
  write_png_gray(tmp.file("a.png"), img);
  GrayImage back = read_png_gray(tmp.file("a.png"));
  CHECK(back.width == img.width);
  CHECK(back.height == img.height);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("reading a missing PNG raises IoError") {
  TempDir tmp("pngmiss");
  try {
    (void)read_png_gray(tmp.file("nope.png"));
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}

TEST_CASE("WAV write/read round-trips within 16-bit precision") {
  TempDir tmp("wav");
  AudioTrack t;
  t.sample_rate = 16000;
  t.samples.resize(1600);
  for (int i = 0; i < 1600; ++i)
    t.samples[size_t(i)] = 0.9 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0);
  write_wav(tmp.file("a.wav"), t);
  AudioTrack back = read_wav(tmp.file("a.wav"));
  CHECK(back.sample_rate == 16000);
  CHECK(back.samples.size() == t.samples.size());
  double worst = 0.0;
  for (size_t i = 0; i < t.samples.size(); ++i)
    worst = std::max(worst, std::abs(back.samples[i] - t.samples[i]));
  // write scales by 32767, read divides by 32768 (the common PCM convention):
  // |v - round(v*32767)/32768| <= (|v| + 0.5)/32768, with |v| <= 0.9 here
  CHECK(worst <= (0.9 + 0.5) / 32768.0 + 1e-12);
}

TEST_CASE("WAV read is strict about missing files") {
  TempDir tmp("wavmiss");
  try {
    (void)read_wav(tmp.file("nope.wav"));
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoError);
  }
}
