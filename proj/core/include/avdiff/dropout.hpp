#pragma once

#include "avdiff/config.hpp"
#include "avdiff/rng.hpp"
#include "avdiff/types.hpp"

namespace avdiff {

/// Training-time condition masking/dropping. Sets the bundle's flags from
/// four independent Bernoulli draws (audio mask, motion-latent mask,
/// reference drop, motion-frame mask — always consumed in that order so a
/// stream position is independent of outcomes). Masking zeroes features at
/// the use site but keeps the attention path; dropping the reference
/// removes its spatial injection AND the motion-frame concatenation from
/// temporal attention. Feature contents are not touched here: consumers
/// honor the flags, so contents behind a set flag can never leak.
[[nodiscard]] ConditionBundle apply_dropout(const ConditionBundle& bundle,
                                            const DropoutRates& rates, Rng& rng);

/// Dedicated per-sample RNG stream so batches reproduce independently of
/// worker scheduling: keyed by (global seed, sample index).
Rng dropout_stream(uint64_t global_seed, uint64_t sample_index);

}  // namespace avdiff
