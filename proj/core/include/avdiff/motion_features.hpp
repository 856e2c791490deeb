#pragma once

#include <optional>
#include <string>
#include <vector>

namespace avdiff {

/// Per-frame 2D facial keypoints with the index roles used by the motion
/// conditions and metrics.
struct KeypointSequence {
  int frames = 0;
  int n_points = 0;
  std::vector<double> xy;  // [frames * n_points * 2], row-major (f, k, {x,y})

  int nose_index = 0;
  std::vector<int> upper_face_indices;
  std::vector<int> mouth_indices;

  double x(int f, int k) const { return xy[(size_t(f) * n_points + k) * 2]; }
  double y(int f, int k) const { return xy[(size_t(f) * n_points + k) * 2 + 1]; }
  void set(int f, int k, double px, double py) {
    xy[(size_t(f) * n_points + k) * 2] = px;
    xy[(size_t(f) * n_points + k) * 2 + 1] = py;
  }
};

void validate_keypoints(const KeypointSequence& kps);

/// First `len` frames starting at `start`, same index roles.
KeypointSequence slice_frames(const KeypointSequence& kps, int start, int len);

/// Var_x + Var_y of the nose-tip trajectory (population variance).
/// The head-movement condition; also the Glo metric.
double head_movement_variance(const KeypointSequence& kps);

/// Mean over the upper-face keypoints of (Var_x + Var_y) of their
/// nose-relative coordinates. The expression condition.
double expression_variance(const KeypointSequence& kps);

/// expression_variance restricted to upper-face points not in the mouth
/// set (the evaluation-metric variant).
double expression_variance_excluding_mouth(const KeypointSequence& kps);

struct MotionMetrics {
  double glo = 0.0;
  double exp = 0.0;
  std::optional<double> dglo;  // |Glo(gen) - Glo(gt)|, present with a reference
  std::optional<double> dexp;
};

/// Glo/Exp of `gen`, plus absolute deviations when `gt` is given.
MotionMetrics motion_metrics(const KeypointSequence& gen, const KeypointSequence* gt);

/// Mean of per-window metrics over consecutive non-overlapping windows of
/// `window` frames (trailing remainder dropped).
MotionMetrics windowed_motion_metrics(const KeypointSequence& gen, const KeypointSequence* gt,
                                      int window);

/// JSON-lines format: a header record naming the index roles, then one
/// record per frame: {"frame": i, "points": [[x, y], ...]}.
KeypointSequence read_keypoints_jsonl(const std::string& path);
void write_keypoints_jsonl(const std::string& path, const KeypointSequence& kps);

}  // namespace avdiff
