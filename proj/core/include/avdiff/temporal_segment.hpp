#pragma once

#include <vector>

#include "avdiff/rng.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff {

enum class AbstractionStrategy { Uniform, Mean, Random };

// Deterministic index map from abstracted motion-frame slots to raw buffer
// positions. Raw index 0 is the frame closest to the current clip; segment k
// spans raw frames [segment_start(k), segment_start(k) + s * r^k) and
// contributes s slots, each standing for a contiguous bucket of r^k frames.
struct SegmentSchedule {
  int stride = 0;        // s: slots per segment
  int expand_ratio = 0;  // r: per-segment bucket growth factor
  int n_segments = 0;

  std::vector<int> indices;     // [n_seg * s] slot -> raw frame (uniform pick)
  std::vector<int> segment_of;  // [n_seg * s] slot -> segment k
  AbstractionStrategy strategy = AbstractionStrategy::Uniform;

  int slots() const { return static_cast<int>(indices.size()); }
  // First raw index of segment k.
  int segment_start(int k) const;
  // Raw frames per bucket in segment k (= r^k).
  int bucket_width(int k) const;
  // First raw index of slot i's bucket.
  int bucket_start(int slot) const;
};

// Builds the slot->frame map; `motion_frame_len` is the raw buffer size M the
// schedule must stay inside. Random strategy draws one raw index per bucket
// from `rng` (required for Random, ignored otherwise).
SegmentSchedule build_schedule(int s, int r, int n_seg, int motion_frame_len,
                               AbstractionStrategy strategy, Rng* rng = nullptr);

// Collapses the raw buffer [M, C, h, w] to abstracted latents [n_seg*s, C, h, w]:
// gather at indices (Uniform/Random) or per-bucket mean (Mean).
Tensor abstract_motion_frames(const Tensor& motion_frames, const SegmentSchedule& schedule);

// Maps per-raw-frame validity to per-slot validity: a slot is valid only when
// every raw frame in its bucket is valid (Mean), or when its chosen frame is
// valid (Uniform/Random).
std::vector<uint8_t> abstract_validity(const std::vector<uint8_t>& raw_validity,
                                       const SegmentSchedule& schedule);

}  // namespace avdiff
