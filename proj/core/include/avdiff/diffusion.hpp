#pragma once

#include <functional>
#include <vector>

#include "avdiff/model.hpp"
#include "avdiff/rng.hpp"
#include "avdiff/tensor.hpp"
#include "avdiff/types.hpp"

namespace avdiff {

/// z_t = sqrt(acp[t]) * z_0 + sqrt(1 - acp[t]) * eps. The caller supplies
/// eps for determinism.
Tensor add_noise(const Tensor& z0, int t, const Tensor& eps, const DiffusionSchedule& sched);

/// Inverse of add_noise given the same eps (training-time sanity checks).
Tensor recover_clean(const Tensor& z_t, int t, const Tensor& eps, const DiffusionSchedule& sched);

/// Three-prediction guidance:
///   e = audio_ratio * (e_audio - e_ref) + ref_ratio * (e_ref - e_base) + e_base
Tensor cfg_combine(const Tensor& e_audio, const Tensor& e_ref, const Tensor& e_base,
                   double audio_ratio = 5.0, double ref_ratio = 3.0);

/// Ascending sub-sequence of timesteps visited by the sampler.
std::vector<int> ddim_timesteps(int total_steps, int sample_steps);

/// Noise prediction at (x, t); the sampler is agnostic to where it comes
/// from (full model with guidance, or an analytic score in tests).
using EpsFn = std::function<Tensor(const Tensor& x, int t)>;

/// Deterministic (eta = 0) DDIM from seeded gaussian noise down to a clean
/// sample of `shape`. Runs without building autodiff graphs.
Tensor ddim_sample(const EpsFn& eps_fn, const Shape& shape, const DiffusionSchedule& sched,
                   int sample_steps, Rng& rng);

struct CfgRatios {
  double audio = 5.0;
  double ref = 3.0;
};

/// Guided noise prediction for one bundle: full pass, audio-dropped pass,
/// audio+reference-dropped pass, combined with cfg_combine. The feature
/// cache (shared by the first two passes) is the caller's.
Tensor guided_epsilon(const DiffusionModel& model, const Tensor& x, int t,
                      const ConditionBundle& cond, const Tensor* motion_latent,
                      const ReferenceFeatureCache& cache, CfgRatios ratios);

/// Autoregressive clip loop: each clip conditions on the last M generated
/// frames (closest-first; not-yet-generated slots zeroed with validity
/// flags). audio_windows is [n_frames_total_or_more, 5, A]; rows past the
/// end clamp to the last row. Returns n_clips tensors of shape [F,C,h,w].
std::vector<Tensor> generate_long_video(const DiffusionModel& model,
                                        const DiffusionSchedule& sched, const Tensor& ref_latent,
                                        const Tensor& audio_windows, int n_clips,
                                        int sample_steps, CfgRatios ratios, Rng& rng);

}  // namespace avdiff
