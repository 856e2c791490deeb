#include "avdiff/trainer.hpp"

#include <cmath>

#include "avdiff/audio.hpp"
#include "avdiff/codec.hpp"
#include "avdiff/diffusion.hpp"
#include "avdiff/dropout.hpp"
#include "avdiff/errors.hpp"
#include "avdiff/motion_features.hpp"

namespace avdiff {

AdamW::AdamW(nn::ParamStore& params, double lr, double weight_decay, double beta1, double beta2,
             double eps)
    : params_(&params), lr_(lr), wd_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  check(lr > 0.0, ErrorCode::InvalidConfig, "learning rate must be positive");
  for (const std::string& name : params.names()) {
    size_t n = size_t(params.get(name).size());
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void AdamW::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, double(t_));
  const double bc2 = 1.0 - std::pow(beta2_, double(t_));
  const auto& names = params_->names();
  for (size_t i = 0; i < names.size(); ++i) {
    Tensor p = params_->get(names[i]);
    const std::vector<double>& g = p.grad();
    const bool decay = p.shape().size() >= 2;
    std::vector<double>& w = p.data();
    std::vector<double>& m = m_[i];
    std::vector<double>& v = v_[i];
    for (size_t j = 0; j < m.size(); ++j) {
      double gj = g.empty() ? 0.0 : g[j];
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
      if (decay) w[j] *= 1.0 - lr_ * wd_;
      w[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
    }
  }
}

namespace {

// Per-video constants shared across steps: frame latents, audio windows, and
// the keypoint track the variance conditions are computed from.
struct PreparedVideo {
  std::vector<Tensor> latents;  // per frame [C, h, w]
  Tensor audio_windows;         // [n_audio_rows, 5, A] (stage 2 only)
  const KeypointSequence* keypoints = nullptr;
};

std::vector<PreparedVideo> prepare_videos(const DiffusionModel& model,
                                          const SyntheticDataset& data, bool with_audio) {
  check(!data.videos.empty(), ErrorCode::InvalidConfig, "training needs at least one video");
  const ModelConfig& mc = model.config();
  NoGradGuard ng;
  LatentCodec codec(data.image_size, mc.latent_channels, mc.latent_height, mc.latent_width);
  AudioFeatureExtractor ex;
  ex.feature_dim = mc.audio_feature_dim;
  ex.seed = mc.seed;  // features must reproduce bit-for-bit at inference
  std::vector<PreparedVideo> out;
  for (const SyntheticVideo& v : data.videos) {
    PreparedVideo pv;
    for (const Tensor& frame : v.frames) pv.latents.push_back(codec.encode(frame));
    if (with_audio) pv.audio_windows = extract_audio_embedding(ex, v.audio, data.fps);
    pv.keypoints = &v.keypoints;
    out.push_back(std::move(pv));
  }
  return out;
}

// Stacks per-frame [C,h,w] latents into [k, C, h, w]; a negative index yields
// an all-zero slot.
Tensor stack_latents(const std::vector<Tensor>& frames, const std::vector<int>& idx) {
  const Shape& s = frames.front().shape();
  int64_t per = frames.front().size();
  std::vector<double> buf(size_t(idx.size()) * per, 0.0);
  for (size_t i = 0; i < idx.size(); ++i)
    if (idx[i] >= 0) {
      const std::vector<double>& src = frames[size_t(idx[i])].data();
      std::copy(src.begin(), src.end(), buf.begin() + int64_t(i) * per);
    }
  return Tensor::from({int(idx.size()), s[0], s[1], s[2]}, std::move(buf));
}

// Rows [start, start+count) of [n, 5, A], clamping out-of-range rows to the
// nearest valid one.
Tensor slice_audio_rows(const Tensor& windows, int start, int count) {
  const Shape& s = windows.shape();
  int64_t per = int64_t(s[1]) * s[2];
  std::vector<double> buf(size_t(count) * per);
  for (int i = 0; i < count; ++i) {
    int64_t row = std::min<int64_t>(std::max<int64_t>(start + i, 0), s[0] - 1);
    auto src = windows.data().begin() + row * per;
    std::copy(src, src + per, buf.begin() + int64_t(i) * per);
  }
  return Tensor::from({count, s[1], s[2]}, std::move(buf));
}

void finish_stats(TrainStats& st) {
  size_t n = st.losses.size();
  size_t w = std::min<size_t>(10, n);
  if (w == 0) return;
  double a = 0, b = 0;
  for (size_t i = 0; i < w; ++i) {
    a += st.losses[i];
    b += st.losses[n - 1 - i];
  }
  st.first10_mean = a / double(w);
  st.last10_mean = b / double(w);
}

}  // namespace

TrainStats train_stage1(DiffusionModel& model, const SyntheticDataset& data,
                        const TrainConfig& tc, uint64_t seed, const LogFn& log) {
  check(!model.has_temporal_audio(), ErrorCode::InvalidConfig,
        "stage 1 expects a model without temporal/audio modules");
  check(tc.steps > 0 && tc.batch_size > 0, ErrorCode::InvalidConfig,
        "steps and batch size must be positive");
  const ModelConfig& mc = model.config();
  auto videos = prepare_videos(model, data, /*with_audio=*/false);
  DiffusionSchedule sched = DiffusionSchedule::linear(mc.noise_steps);
  AdamW opt(model.params(), tc.lr, tc.weight_decay);
  Rng rng = Rng::keyed(seed, 0x7374616765315f64ull);  // data stream

  TrainStats st;
  for (int step = 0; step < tc.steps; ++step) {
    model.params().zero_grad();
    Tensor loss;
    for (int b = 0; b < tc.batch_size; ++b) {
      int64_t vi = rng.uniform_int(0, int64_t(videos.size()) - 1);
      const PreparedVideo& pv = videos[size_t(vi)];
      int64_t n = int64_t(pv.latents.size());
      int64_t fi = rng.uniform_int(0, n - 1);
      int64_t ri = rng.uniform_int(0, n - 1);
      int t = int(rng.uniform_int(0, mc.noise_steps - 1));

      Tensor z0 = stack_latents(pv.latents, {int(fi)});
      Tensor eps = Tensor::randn(z0.shape(), rng);
      Tensor z_t = add_noise(z0, t, eps, sched);

      ConditionBundle cond;
      cond.ref_latent = pv.latents[size_t(ri)];
      cond.audio_embed = Tensor::zeros({1, 5, mc.audio_feature_dim});
      Rng drop_rng = dropout_stream(seed, uint64_t(step) * tc.batch_size + b);
      cond = apply_dropout(cond, tc.dropout, drop_rng);

      Tensor pred = model.denoise(z_t, t, cond, nullptr);
      Tensor sample_loss = mse(pred, eps);
      loss = loss.defined() ? add(loss, sample_loss) : sample_loss;
    }
    loss = scale(loss, 1.0 / tc.batch_size);
    double value = loss.item();
    check(std::isfinite(value), ErrorCode::NonFiniteLoss,
          "loss diverged at step " + std::to_string(step));
    loss.backward();
    opt.step();
    st.losses.push_back(value);
    if (log && (step % tc.log_every == 0 || step == tc.steps - 1)) log(step, value);
  }
  finish_stats(st);
  return st;
}

TrainStats train_stage2(DiffusionModel& model, const SyntheticDataset& data,
                        const TrainConfig& tc, uint64_t seed, const LogFn& log) {
  check(model.has_temporal_audio(), ErrorCode::InvalidConfig,
        "stage 2 expects a model with temporal/audio modules");
  check(tc.steps > 0 && tc.batch_size > 0, ErrorCode::InvalidConfig,
        "steps and batch size must be positive");
  const ModelConfig& mc = model.config();
  const int F = mc.clip_len;
  const int M = mc.motion_frame_len;
  auto videos = prepare_videos(model, data, /*with_audio=*/true);
  for (const PreparedVideo& pv : videos)
    check(int(pv.latents.size()) >= F, ErrorCode::TooFewFrames,
          "every training video must be at least one clip long");
  DiffusionSchedule sched = DiffusionSchedule::linear(mc.noise_steps);
  AdamW opt(model.params(), tc.lr, tc.weight_decay);
  Rng rng = Rng::keyed(seed, 0x7374616765325f64ull);  // data stream

  TrainStats st;
  for (int step = 0; step < tc.steps; ++step) {
    model.params().zero_grad();
    Tensor loss;
    for (int b = 0; b < tc.batch_size; ++b) {
      int64_t vi = rng.uniform_int(0, int64_t(videos.size()) - 1);
      const PreparedVideo& pv = videos[size_t(vi)];
      int64_t n = int64_t(pv.latents.size());
      int c = int(rng.uniform_int(0, n - F));
      int64_t ri = rng.uniform_int(0, n - 1);
      int t = int(rng.uniform_int(0, mc.noise_steps - 1));
      ConditionTag tag = sample_training_condition(rng);

      std::vector<int> clip_idx(F);
      for (int i = 0; i < F; ++i) clip_idx[size_t(i)] = c + i;
      Tensor z0 = stack_latents(pv.latents, clip_idx);
      Tensor eps = Tensor::randn(z0.shape(), rng);
      Tensor z_t = add_noise(z0, t, eps, sched);

      ConditionBundle cond;
      cond.ref_latent = pv.latents[size_t(ri)];
      std::vector<int> mf_idx(M);
      cond.motion_frame_validity.resize(size_t(M));
      for (int i = 0; i < M; ++i) {
        int src = c - 1 - i;  // slot 0 = immediately preceding frame
        mf_idx[size_t(i)] = src;
        cond.motion_frame_validity[size_t(i)] = src >= 0 ? 1 : 0;
      }
      cond.motion_frames = stack_latents(pv.latents, mf_idx);
      cond.audio_embed = slice_audio_rows(pv.audio_windows, c, F);
      KeypointSequence clip_kps = slice_frames(*pv.keypoints, c, F);
      cond.head_move_var = head_movement_variance(clip_kps);
      cond.expr_var = expression_variance_excluding_mouth(clip_kps);
      Rng drop_rng = dropout_stream(seed, uint64_t(step) * tc.batch_size + b);
      cond = apply_dropout(cond, tc.dropout, drop_rng);

      Tensor motion_latent;
      const Tensor* ml = nullptr;
      if (!cond.mask_motion_latents) {
        motion_latent = model.motion_bank().from_bundle(tag, cond);
        ml = &motion_latent;
      }
      Tensor pred;
      if (cond.drop_ref) {
        pred = model.denoise(z_t, t, cond, ml);  // features would go unused
      } else {
        ReferenceFeatureCache cache = model.extract_features(cond);
        pred = model.denoise(z_t, t, cond, ml, &cache);
      }
      Tensor sample_loss = mse(pred, eps);
      loss = loss.defined() ? add(loss, sample_loss) : sample_loss;
    }
    loss = scale(loss, 1.0 / tc.batch_size);
    double value = loss.item();
    check(std::isfinite(value), ErrorCode::NonFiniteLoss,
          "loss diverged at step " + std::to_string(step));
    loss.backward();
    opt.step();
    st.losses.push_back(value);
    if (log && (step % tc.log_every == 0 || step == tc.steps - 1)) log(step, value);
  }
  finish_stats(st);
  return st;
}

}  // namespace avdiff
