#include "avdiff/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "avdiff/errors.hpp"
#include "avdiff/image_io.hpp"
#include "avdiff/rng.hpp"

namespace avdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Keypoint layout shared by the generator and all consumers.
constexpr int kNose = 0;
constexpr int kUpperBegin = 1;   // 10 brow + 12 eye-ring + 15 forehead arc
constexpr int kUpperCount = 37;
constexpr int kMouthBegin = 38;  // 8 points on the mouth ellipse
constexpr int kMouthCount = 8;
constexpr int kNumPoints = 46;

struct Painter {
  int size;
  std::vector<double> px;
  explicit Painter(int s) : size(s), px(size_t(s) * s, 0.0) {}
  void disk(double cx, double cy, double rx, double ry, double value) {
    int x0 = std::max(0, int(std::floor(cx - rx - 1)));
    int x1 = std::min(size - 1, int(std::ceil(cx + rx + 1)));
    int y0 = std::max(0, int(std::floor(cy - ry - 1)));
    int y1 = std::min(size - 1, int(std::ceil(cy + ry + 1)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        double dx = (x - cx) / rx, dy = (y - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) px[size_t(y) * size + x] = value;
      }
  }
  Tensor tensor() const { return Tensor::from({size, size}, px); }
};

struct FaceParams {
  double head_amp, head_freq, head_phase;
  double brow_amp, brow_freq;
  double env_freq, env_phase;
  double carrier_freq;
};

FaceParams draw_params(Rng& rng) {
  FaceParams p;
  p.head_amp = rng.uniform(1.0, 3.0);
  p.head_freq = rng.uniform(0.3, 0.9);
  p.head_phase = rng.uniform(0.0, 2.0 * kPi);
  p.brow_amp = rng.uniform(0.5, 2.0);
  p.brow_freq = rng.uniform(0.4, 1.1);
  p.env_freq = rng.uniform(0.5, 1.5);
  p.env_phase = rng.uniform(0.0, 2.0 * kPi);
  p.carrier_freq = rng.uniform(180.0, 260.0);
  return p;
}

double envelope(const FaceParams& p, double t) {
  return 0.5 + 0.5 * std::sin(2.0 * kPi * p.env_freq * t + p.env_phase);
}

}  // namespace

SyntheticVideo synth_video(uint64_t seed, uint64_t index, int n_frames, double fps,
                           int image_size) {
  check(n_frames > 0 && image_size > 0 && fps > 0.0, ErrorCode::NonPositiveDim,
        "synthetic video needs positive frame count, size, and rate");
  Rng rng = Rng::keyed(seed, index);
  FaceParams p = draw_params(rng);

  SyntheticVideo v;
  v.keypoints.frames = n_frames;
  v.keypoints.n_points = kNumPoints;
  v.keypoints.nose_index = kNose;
  for (int i = 0; i < kUpperCount; ++i) v.keypoints.upper_face_indices.push_back(kUpperBegin + i);
  for (int i = 0; i < kMouthCount; ++i) v.keypoints.mouth_indices.push_back(kMouthBegin + i);
  v.keypoints.xy.assign(size_t(n_frames) * kNumPoints * 2, 0.0);

  const double scale = image_size / 64.0;
  const double head_r = 20.0 * scale;
  const double base_cx = 32.0 * scale, base_cy = 30.0 * scale;

  for (int f = 0; f < n_frames; ++f) {
    double t = f / fps;
    double wob = std::sin(2.0 * kPi * p.head_freq * t + p.head_phase);
    double cx = base_cx + p.head_amp * scale * wob;
    double cy = base_cy + 0.5 * p.head_amp * scale * std::sin(2.0 * kPi * p.head_freq * t);
    double brow_lift = p.brow_amp * scale * std::sin(2.0 * kPi * p.brow_freq * t);
    double aperture = envelope(p, t);
    v.mouth_aperture.push_back(aperture);
    v.audio_envelope.push_back(aperture);

    Painter img(image_size);
    img.disk(cx, cy, head_r, head_r, 0.55);                                        // head
    img.disk(cx - 7 * scale, cy - 5 * scale, 2.2 * scale, 2.2 * scale, 0.95);      // eyes
    img.disk(cx + 7 * scale, cy - 5 * scale, 2.2 * scale, 2.2 * scale, 0.95);
    double brow_y = cy - (9.0 + brow_lift / scale) * scale;
    img.disk(cx - 7 * scale, brow_y, 3.0 * scale, 0.8 * scale, 0.85);              // brows
    img.disk(cx + 7 * scale, brow_y, 3.0 * scale, 0.8 * scale, 0.85);
    img.disk(cx, cy + 2 * scale, 1.2 * scale, 1.2 * scale, 0.75);                  // nose
    double mouth_h = (0.8 + 4.0 * aperture) * scale;
    img.disk(cx, cy + 9 * scale, 4.5 * scale, mouth_h, 0.9);                       // mouth
    v.frames.push_back(img.tensor());

    auto put = [&](int k, double x, double y) { v.keypoints.set(f, k, x, y); };
    put(kNose, cx, cy + 2 * scale);
    int k = kUpperBegin;
    for (int i = 0; i < 5; ++i) {  // 10 brow points
      double off = (i - 2) * 1.2 * scale;
      put(k++, cx - 7 * scale + off, brow_y);
      put(k++, cx + 7 * scale + off, brow_y);
    }
    for (int i = 0; i < 6; ++i) {  // 12 eye-ring points
      double a = 2.0 * kPi * i / 6.0;
      put(k++, cx - 7 * scale + 2.2 * scale * std::cos(a), cy - 5 * scale + 2.2 * scale * std::sin(a));
      put(k++, cx + 7 * scale + 2.2 * scale * std::cos(a), cy - 5 * scale + 2.2 * scale * std::sin(a));
    }
    for (int i = 0; i < 15; ++i) {  // 15 forehead arc points
      double a = kPi + kPi * i / 14.0;  // upper half of the head circle
      put(k++, cx + 0.8 * head_r * std::cos(a), cy + 0.8 * head_r * std::sin(a));
    }
    for (int i = 0; i < kMouthCount; ++i) {
      double a = 2.0 * kPi * i / kMouthCount;
      put(kMouthBegin + i, cx + 4.5 * scale * std::cos(a), cy + 9 * scale + mouth_h * std::sin(a));
    }
  }

  const int sr = 16000;
  int n_samples = int(std::llround(double(n_frames) / fps * sr));
  v.audio.sample_rate = sr;
  v.audio.samples.resize(size_t(n_samples));
  for (int i = 0; i < n_samples; ++i) {
    double t = double(i) / sr;
    double carrier = std::sin(2.0 * kPi * p.carrier_freq * t);
    v.audio.samples[size_t(i)] = 0.8 * envelope(p, t) * carrier;
  }
  return v;
}

SyntheticDataset synth_dataset(uint64_t seed, int n_videos, int n_frames, double fps,
                               int image_size) {
  check(n_videos > 0, ErrorCode::NonPositiveDim, "dataset needs at least one video");
  SyntheticDataset ds;
  ds.fps = fps;
  ds.image_size = image_size;
  ds.seed = seed;
  for (int i = 0; i < n_videos; ++i)
    ds.videos.push_back(synth_video(seed, uint64_t(i), n_frames, fps, image_size));
  return ds;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  check(a.size() == b.size() && a.size() >= 2, ErrorCode::ShapeMismatch,
        "correlation needs two equally long series");
  double ma = 0, mb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= double(a.size());
  mb /= double(b.size());
  double sab = 0, saa = 0, sbb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  check(saa > 0 && sbb > 0, ErrorCode::ShapeMismatch, "correlation of a constant series");
  return sab / std::sqrt(saa * sbb);
}

namespace {

std::string video_dir_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "video_%03d", i);
  return buf;
}

std::string frame_file_name(int f) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%05d.png", f);
  return buf;
}

}  // namespace

void write_dataset(const std::string& dir, const SyntheticDataset& ds) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorCode::IoError, "cannot create dataset directory: " + dir);

  json manifest;
  manifest["fps"] = ds.fps;
  manifest["image_size"] = ds.image_size;
  manifest["seed"] = ds.seed;
  manifest["n_videos"] = ds.videos.size();
  json vids = json::array();
  for (size_t i = 0; i < ds.videos.size(); ++i) {
    const SyntheticVideo& v = ds.videos[i];
    fs::path vdir = fs::path(dir) / video_dir_name(int(i));
    fs::create_directories(vdir, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create video directory: " + vdir.string());
    for (size_t f = 0; f < v.frames.size(); ++f)
      write_png_gray((vdir / frame_file_name(int(f))).string(), quantize_image(v.frames[f]));
    write_wav((vdir / "audio.wav").string(), v.audio);
    write_keypoints_jsonl((vdir / "keypoints.jsonl").string(), v.keypoints);
    json jv;
    jv["dir"] = video_dir_name(int(i));
    jv["n_frames"] = v.frames.size();
    jv["mouth_aperture"] = v.mouth_aperture;
    jv["audio_envelope"] = v.audio_envelope;
    vids.push_back(std::move(jv));
  }
  manifest["videos"] = std::move(vids);
  std::ofstream out(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write dataset manifest");
  out << manifest.dump(2) << "\n";
  if (!out) raise(ErrorCode::IoError, "short write to dataset manifest");
}

SyntheticDataset load_dataset(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) raise(ErrorCode::IoError, "cannot open dataset manifest in: " + dir);
  json manifest;
  try {
    in >> manifest;
  } catch (const std::exception& e) {
    raise(ErrorCode::ParseError, std::string("bad dataset manifest: ") + e.what());
  }
  SyntheticDataset ds;
  try {
    ds.fps = manifest.at("fps").get<double>();
    ds.image_size = manifest.at("image_size").get<int>();
    ds.seed = manifest.at("seed").get<uint64_t>();
    for (const auto& jv : manifest.at("videos")) {
      SyntheticVideo v;
      fs::path vdir = fs::path(dir) / jv.at("dir").get<std::string>();
      int n_frames = jv.at("n_frames").get<int>();
      for (int f = 0; f < n_frames; ++f) {
        GrayImage img = read_png_gray((vdir / frame_file_name(f)).string());
        check(img.width == ds.image_size && img.height == ds.image_size,
              ErrorCode::ShapeMismatch, "dataset frame size differs from manifest");
        v.frames.push_back(dequantize_image(img));
      }
      v.audio = read_wav((vdir / "audio.wav").string());
      v.keypoints = read_keypoints_jsonl((vdir / "keypoints.jsonl").string());
      check(v.keypoints.frames == n_frames, ErrorCode::FrameCountMismatch,
            "keypoint frame count differs from manifest");
      v.mouth_aperture = jv.at("mouth_aperture").get<std::vector<double>>();
      v.audio_envelope = jv.at("audio_envelope").get<std::vector<double>>();
      ds.videos.push_back(std::move(v));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::ParseError, std::string("bad dataset manifest: ") + e.what());
  }
  return ds;
}

}  // namespace avdiff
