#include "avdiff/temporal_segment.hpp"

#include "avdiff/errors.hpp"

namespace avdiff {

int SegmentSchedule::segment_start(int k) const {
  int start = 0;
  int seg = stride;
  for (int j = 0; j < k; ++j) {
    start += seg;
    seg *= expand_ratio;
  }
  return start;
}

int SegmentSchedule::bucket_width(int k) const {
  int w = 1;
  for (int j = 0; j < k; ++j) w *= expand_ratio;
  return w;
}

int SegmentSchedule::bucket_start(int slot) const {
  int k = segment_of[slot];
  return segment_start(k) + bucket_width(k) * (slot % stride);
}

SegmentSchedule build_schedule(int s, int r, int n_seg, int motion_frame_len,
                               AbstractionStrategy strategy, Rng* rng) {
  check(s > 0, ErrorCode::NonPositiveDim, "tsm_stride must be positive");
  check(r > 0, ErrorCode::NonPositiveDim, "tsm_expand_ratio must be positive");
  check(n_seg > 0, ErrorCode::NonPositiveDim, "tsm_segments must be positive");
  check(strategy != AbstractionStrategy::Random || rng != nullptr, ErrorCode::InvalidConfig,
        "random abstraction strategy requires an rng");

  SegmentSchedule sch;
  sch.stride = s;
  sch.expand_ratio = r;
  sch.n_segments = n_seg;
  sch.strategy = strategy;
  sch.indices.reserve(size_t(n_seg) * s);
  sch.segment_of.reserve(size_t(n_seg) * s);

  int seg_start = 0;
  int bucket = 1;  // r^k
  for (int k = 0; k < n_seg; ++k) {
    for (int m = 0; m < s; ++m) {
      int lo = seg_start + bucket * m;
      int idx = lo;  // first frame of the bucket
      if (strategy == AbstractionStrategy::Random) idx = lo + rng->uniform_int(0, bucket - 1);
      sch.indices.push_back(idx);
      sch.segment_of.push_back(k);
    }
    seg_start += s * bucket;
    bucket *= r;
  }
  // seg_start now equals total coverage; every bucket must fit in the buffer.
  if (seg_start > motion_frame_len)
    raise(ErrorCode::ScheduleOverrun,
          "segment schedule needs " + std::to_string(seg_start) + " raw motion frames but only " +
              std::to_string(motion_frame_len) + " are available");
  return sch;
}

Tensor abstract_motion_frames(const Tensor& motion_frames, const SegmentSchedule& schedule) {
  const Shape& sh = motion_frames.shape();
  check(sh.size() == 4, ErrorCode::ShapeMismatch, "motion frame buffer must be rank-4 [M,C,h,w]");
  int m_raw = sh[0];
  int per_frame = sh[1] * sh[2] * sh[3];
  int n_out = schedule.slots();
  check(!schedule.indices.empty() && schedule.indices.back() < m_raw, ErrorCode::ShapeMismatch,
        "schedule indexes past the motion frame buffer");

  Tensor out = Tensor::zeros({n_out, sh[1], sh[2], sh[3]});
  const auto& src = motion_frames.data();
  auto& dst = out.data();
  for (int i = 0; i < n_out; ++i) {
    if (schedule.strategy == AbstractionStrategy::Mean) {
      int lo = schedule.bucket_start(i);
      int w = schedule.bucket_width(schedule.segment_of[i]);
      check(lo + w <= m_raw, ErrorCode::ShapeMismatch,
            "bucket extends past the motion frame buffer");
      double inv = 1.0 / w;
      for (int f = lo; f < lo + w; ++f)
        for (int e = 0; e < per_frame; ++e)
          dst[size_t(i) * per_frame + e] += src[size_t(f) * per_frame + e] * inv;
    } else {
      int f = schedule.indices[i];
      for (int e = 0; e < per_frame; ++e)
        dst[size_t(i) * per_frame + e] = src[size_t(f) * per_frame + e];
    }
  }
  return out;
}

std::vector<uint8_t> abstract_validity(const std::vector<uint8_t>& raw_validity,
                                       const SegmentSchedule& schedule) {
  int n_out = schedule.slots();
  std::vector<uint8_t> out(n_out, 1);
  if (raw_validity.empty()) return out;
  for (int i = 0; i < n_out; ++i) {
    if (schedule.strategy == AbstractionStrategy::Mean) {
      int lo = schedule.bucket_start(i);
      int w = schedule.bucket_width(schedule.segment_of[i]);
      bool ok = true;
      for (int f = lo; f < lo + w; ++f)
        ok = ok && f < static_cast<int>(raw_validity.size()) && raw_validity[f];
      out[i] = ok ? 1 : 0;
    } else {
      int f = schedule.indices[i];
      out[i] = (f < static_cast<int>(raw_validity.size()) && raw_validity[f]) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace avdiff
