#include "avdiff/dropout.hpp"

namespace avdiff {

ConditionBundle apply_dropout(const ConditionBundle& bundle, const DropoutRates& rates, Rng& rng) {
  ConditionBundle out = bundle;
  // fixed draw order: stream position never depends on outcomes
  bool mask_audio = rng.bernoulli(rates.audio);
  bool mask_latents = rng.bernoulli(rates.motion_latents);
  bool drop_ref = rng.bernoulli(rates.ref_drop);
  bool mask_mf = rng.bernoulli(rates.mf_mask);
  out.mask_audio = out.mask_audio || mask_audio;
  out.mask_motion_latents = out.mask_motion_latents || mask_latents;
  out.drop_ref = out.drop_ref || drop_ref;
  out.mask_motion_frames = out.mask_motion_frames || mask_mf;
  return out;
}

Rng dropout_stream(uint64_t global_seed, uint64_t sample_index) {
  // offset keeps the dropout streams disjoint from other keyed streams
  return Rng::keyed(global_seed, 0x64726f7000000000ull /* "drop" */ + sample_index);
}

}  // namespace avdiff
