#include "avdiff/motion_features.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "avdiff/errors.hpp"

namespace avdiff {

using json = nlohmann::ordered_json;

void validate_keypoints(const KeypointSequence& kps) {
  check(kps.frames >= 0 && kps.n_points > 0, ErrorCode::NonPositiveDim,
        "keypoint sequence dimensions must be positive");
  check(kps.xy.size() == size_t(kps.frames) * kps.n_points * 2, ErrorCode::ShapeMismatch,
        "keypoint buffer size does not match frames * points");
  auto in_range = [&](int idx) { return idx >= 0 && idx < kps.n_points; };
  check(in_range(kps.nose_index), ErrorCode::InvalidConfig, "nose_index out of range");
  for (int i : kps.upper_face_indices)
    check(in_range(i), ErrorCode::InvalidConfig, "upper_face index out of range");
  for (int i : kps.mouth_indices)
    check(in_range(i), ErrorCode::InvalidConfig, "mouth index out of range");
  for (double v : kps.xy)
    check(std::isfinite(v), ErrorCode::ShapeMismatch, "keypoints contain non-finite values");
}

KeypointSequence slice_frames(const KeypointSequence& kps, int start, int len) {
  check(start >= 0 && len >= 0 && start + len <= kps.frames, ErrorCode::ShapeMismatch,
        "keypoint slice out of range");
  KeypointSequence out = kps;
  out.frames = len;
  out.xy.assign(kps.xy.begin() + size_t(start) * kps.n_points * 2,
                kps.xy.begin() + size_t(start + len) * kps.n_points * 2);
  return out;
}

namespace {

// population variance of n values
double variance(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return acc / double(v.size());
}

double expression_variance_over(const KeypointSequence& kps, const std::vector<int>& points) {
  check(kps.frames >= 2, ErrorCode::TooFewFrames,
        "expression variance needs at least two frames");
  check(!points.empty(), ErrorCode::InvalidConfig, "no keypoints selected");
  double total = 0.0;
  std::vector<double> rel_x(kps.frames), rel_y(kps.frames);
  for (int k : points) {
    for (int f = 0; f < kps.frames; ++f) {
      rel_x[size_t(f)] = kps.x(f, k) - kps.x(f, kps.nose_index);
      rel_y[size_t(f)] = kps.y(f, k) - kps.y(f, kps.nose_index);
    }
    total += variance(rel_x) + variance(rel_y);
  }
  return total / double(points.size());
}

}  // namespace

double head_movement_variance(const KeypointSequence& kps) {
  check(kps.frames >= 2, ErrorCode::TooFewFrames,
        "head-movement variance needs at least two frames");
  std::vector<double> xs(kps.frames), ys(kps.frames);
  for (int f = 0; f < kps.frames; ++f) {
    xs[size_t(f)] = kps.x(f, kps.nose_index);
    ys[size_t(f)] = kps.y(f, kps.nose_index);
  }
  return variance(xs) + variance(ys);
}

double expression_variance(const KeypointSequence& kps) {
  return expression_variance_over(kps, kps.upper_face_indices);
}

double expression_variance_excluding_mouth(const KeypointSequence& kps) {
  std::vector<int> kept;
  for (int i : kps.upper_face_indices) {
    bool is_mouth = false;
    for (int m : kps.mouth_indices) is_mouth = is_mouth || m == i;
    if (!is_mouth) kept.push_back(i);
  }
  return expression_variance_over(kps, kept);
}

MotionMetrics motion_metrics(const KeypointSequence& gen, const KeypointSequence* gt) {
  MotionMetrics out;
  out.glo = head_movement_variance(gen);
  out.exp = expression_variance_excluding_mouth(gen);
  if (gt) {
    check(gt->frames == gen.frames, ErrorCode::FrameCountMismatch,
          "generated and reference sequences must have equal frame counts");
    out.dglo = std::abs(out.glo - head_movement_variance(*gt));
    out.dexp = std::abs(out.exp - expression_variance_excluding_mouth(*gt));
  }
  return out;
}

MotionMetrics windowed_motion_metrics(const KeypointSequence& gen, const KeypointSequence* gt,
                                      int window) {
  check(window >= 2, ErrorCode::InvalidConfig, "metric window must span at least two frames");
  int n_windows = gen.frames / window;
  check(n_windows >= 1, ErrorCode::TooFewFrames,
        "sequence shorter than one metric window");
  if (gt)
    check(gt->frames == gen.frames, ErrorCode::FrameCountMismatch,
          "generated and reference sequences must have equal frame counts");
  MotionMetrics acc;
  double dglo = 0.0, dexp = 0.0;
  for (int i = 0; i < n_windows; ++i) {
    KeypointSequence gw = slice_frames(gen, i * window, window);
    KeypointSequence tw;
    if (gt) tw = slice_frames(*gt, i * window, window);
    MotionMetrics m = motion_metrics(gw, gt ? &tw : nullptr);
    acc.glo += m.glo;
    acc.exp += m.exp;
    if (gt) {
      dglo += *m.dglo;
      dexp += *m.dexp;
    }
  }
  acc.glo /= n_windows;
  acc.exp /= n_windows;
  if (gt) {
    acc.dglo = dglo / n_windows;
    acc.dexp = dexp / n_windows;
  }
  return acc;
}

KeypointSequence read_keypoints_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open keypoints file: " + path);
  std::string line;
  KeypointSequence kps;
  bool got_header = false;
  std::vector<double> xy;
  int expected_frame = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const std::exception& e) {
      raise(ErrorCode::ParseError, std::string("bad keypoints line: ") + e.what());
    }
    if (!got_header) {
      check(j.contains("n_points") && j.contains("nose_index"), ErrorCode::ParseError,
            "keypoints header must name n_points and nose_index");
      kps.n_points = j.at("n_points").get<int>();
      kps.nose_index = j.at("nose_index").get<int>();
      kps.upper_face_indices = j.value("upper_face_indices", std::vector<int>{});
      kps.mouth_indices = j.value("mouth_indices", std::vector<int>{});
      got_header = true;
      continue;
    }
    check(j.contains("frame") && j.contains("points"), ErrorCode::ParseError,
          "keypoints record must carry frame and points");
    check(j.at("frame").get<int>() == expected_frame, ErrorCode::ParseError,
          "keypoint frames must be consecutive from 0");
    const auto& pts = j.at("points");
    check(static_cast<int>(pts.size()) == kps.n_points, ErrorCode::ShapeMismatch,
          "keypoint record has wrong point count");
    for (const auto& p : pts) {
      check(p.is_array() && p.size() == 2, ErrorCode::ParseError, "point must be [x,y]");
      xy.push_back(p[0].get<double>());
      xy.push_back(p[1].get<double>());
    }
    ++expected_frame;
  }
  check(got_header, ErrorCode::ParseError, "keypoints file lacks a header line");
  kps.frames = expected_frame;
  kps.xy = std::move(xy);
  validate_keypoints(kps);
  return kps;
}

void write_keypoints_jsonl(const std::string& path, const KeypointSequence& kps) {
  validate_keypoints(kps);
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write keypoints file: " + path);
  json header = {{"n_points", kps.n_points},
                 {"nose_index", kps.nose_index},
                 {"upper_face_indices", kps.upper_face_indices},
                 {"mouth_indices", kps.mouth_indices}};
  out << header.dump() << "\n";
  for (int f = 0; f < kps.frames; ++f) {
    json rec;
    rec["frame"] = f;
    json pts = json::array();
    for (int k = 0; k < kps.n_points; ++k) pts.push_back({kps.x(f, k), kps.y(f, k)});
    rec["points"] = std::move(pts);
    out << rec.dump() << "\n";
  }
  if (!out) raise(ErrorCode::IoError, "short write to keypoints file: " + path);
}

}  // namespace avdiff
