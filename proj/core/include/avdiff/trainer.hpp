#pragma once

#include <functional>
#include <vector>

#include "avdiff/config.hpp"
#include "avdiff/dataset.hpp"
#include "avdiff/model.hpp"

namespace avdiff {

// Adam with decoupled weight decay. Decay touches only rank>=2 tensors
// (projection/conv weights and embedding tables), never biases or norm gains.
class AdamW {
 public:
  AdamW(nn::ParamStore& params, double lr, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double eps = 1e-8);

  // Applies one update from the gradients currently stored on the parameters.
  void step();

  double lr() const { return lr_; }

 private:
  nn::ParamStore* params_;
  double lr_, wd_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;  // parallel to params_->names()
};

struct TrainStats {
  std::vector<double> losses;  // one entry per optimizer step
  double first10_mean = 0.0;   // mean loss over the first ten steps
  double last10_mean = 0.0;    // mean loss over the last ten steps
};

using LogFn = std::function<void(int step, double loss)>;

// Stage 1: single-frame denoising with reference conditioning only. The model
// must have been built without the temporal/audio modules. Each sample draws
// one frame as the target and another frame of the same video as reference.
TrainStats train_stage1(DiffusionModel& model, const SyntheticDataset& data,
                        const TrainConfig& tc, uint64_t seed, const LogFn& log = {});

// Stage 2: full clips with motion frames, audio cross-attention, and the
// motion-latent bank (one of audio / head-move variance / expression variance
// drawn per sample). The model must include the temporal/audio modules;
// initialize its parameters from a stage-1 checkpoint before calling.
TrainStats train_stage2(DiffusionModel& model, const SyntheticDataset& data,
                        const TrainConfig& tc, uint64_t seed, const LogFn& log = {});

}  // namespace avdiff
