// Command-line front end: synthetic data generation, two-stage training,
// autoregressive inference, motion metrics, and segment-schedule inspection.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "avdiff/checkpoint.hpp"
#include "avdiff/config.hpp"
#include "avdiff/dataset.hpp"
#include "avdiff/errors.hpp"
#include "avdiff/hash.hpp"
#include "avdiff/inference.hpp"
#include "avdiff/model.hpp"
#include "avdiff/motion_features.hpp"
#include "avdiff/temporal_segment.hpp"
#include "avdiff/trainer.hpp"

namespace {

using json = nlohmann::ordered_json;

struct SynthArgs {
  std::string out;
  int videos = 4;
  int frames = 40;
  double fps = 25.0;
  int image_size = 64;
  uint64_t seed = 0;
};

struct TrainArgs {
  int stage = 1;
  std::string data_dir;
  std::string out;
  std::string config_path;  // empty = built-in desk-scale preset
  std::string init_path;    // stage 2: stage-1 checkpoint to start from
  std::optional<int> steps;
  std::optional<double> lr;
  uint64_t seed = 0;
};

struct MetricsArgs {
  std::string generated;
  std::string reference;
  int window = 0;  // 0 = whole sequence
};

struct ScheduleArgs {
  int stride = 4;
  int expand_ratio = 2;
  int segments = 5;
  int motion_frames = 124;
};

int run_synth(const SynthArgs& a) {
  avdiff::SyntheticDataset ds =
      avdiff::synth_dataset(a.seed, a.videos, a.frames, a.fps, a.image_size);
  avdiff::write_dataset(a.out, ds);
  std::cout << "wrote " << a.videos << " videos x " << a.frames << " frames to " << a.out
            << "\n";
  return 0;
}

int run_train(const TrainArgs& a) {
  avdiff::RunConfig cfg =
      a.config_path.empty() ? avdiff::toy_preset() : avdiff::load_config_file(a.config_path);
  if (a.steps) cfg.train.steps = *a.steps;
  if (a.lr) cfg.train.lr = *a.lr;
  avdiff::validate_config(cfg.model);

  avdiff::SyntheticDataset data = avdiff::load_dataset(a.data_dir);
  avdiff::check(data.image_size == cfg.data.image_size, avdiff::ErrorCode::ShapeMismatch,
                "dataset image size differs from config");

  bool temporal = a.stage == 2;
  avdiff::DiffusionModel model(cfg.model, temporal, cfg.model.seed);
  if (temporal) {
    avdiff::check(!a.init_path.empty(), avdiff::ErrorCode::InvalidConfig,
                  "stage 2 needs --init with a stage-1 checkpoint");
    avdiff::Checkpoint ck = avdiff::load_checkpoint(a.init_path);
    avdiff::check(ck.stage == 1, avdiff::ErrorCode::CheckpointMismatch,
                  "--init must point at a stage-1 checkpoint");
    avdiff::check(ck.config.model == cfg.model, avdiff::ErrorCode::CheckpointMismatch,
                  "stage-1 checkpoint was trained with a different model config");
    avdiff::apply_checkpoint(ck, model.params(), /*strict=*/false);
  }

  auto log = [](int step, double loss) {
    std::printf("step %5d  loss %.6f\n", step, loss);
    std::fflush(stdout);
  };
  avdiff::TrainStats st = temporal ? avdiff::train_stage2(model, data, cfg.train, a.seed, log)
                                   : avdiff::train_stage1(model, data, cfg.train, a.seed, log);
  avdiff::save_checkpoint(a.out, cfg, a.stage, model.params());

  json manifest;
  manifest["config_hash"] = avdiff::config_hash(cfg);
  manifest["seed"] = a.seed;
  manifest["stage"] = a.stage;
  manifest["steps"] = cfg.train.steps;
  manifest["checkpoint_sha256"] = avdiff::file_sha256(a.out);
  manifest["first10_mean"] = st.first10_mean;
  manifest["last10_mean"] = st.last10_mean;
  std::ofstream mf(a.out + ".manifest.json", std::ios::trunc);
  avdiff::check(bool(mf), avdiff::ErrorCode::IoError, "cannot write training manifest");
  mf << manifest.dump(2) << "\n";

  std::printf("first-10 mean %.6f  last-10 mean %.6f\n", st.first10_mean, st.last10_mean);
  std::cout << "saved stage-" << a.stage << " checkpoint to " << a.out << "\n";
  return 0;
}

int run_infer(const avdiff::InferenceRequest& req) {
  avdiff::InferenceResult res = avdiff::run_inference(req);
  std::cout << "wrote " << res.n_frames << " frames (" << res.n_clips << " clips) to "
            << req.out_dir << "\n";
  return 0;
}

int run_metrics(const MetricsArgs& a) {
  avdiff::KeypointSequence gen = avdiff::read_keypoints_jsonl(a.generated);
  avdiff::KeypointSequence ref;
  const avdiff::KeypointSequence* ref_ptr = nullptr;
  if (!a.reference.empty()) {
    ref = avdiff::read_keypoints_jsonl(a.reference);
    ref_ptr = &ref;
  }
  avdiff::MotionMetrics m = a.window > 0
                                ? avdiff::windowed_motion_metrics(gen, ref_ptr, a.window)
                                : avdiff::motion_metrics(gen, ref_ptr);
  json out;
  out["glo"] = m.glo;
  out["exp"] = m.exp;
  if (m.dglo) out["dglo"] = *m.dglo;
  if (m.dexp) out["dexp"] = *m.dexp;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int run_schedule(const ScheduleArgs& a) {
  avdiff::SegmentSchedule sch =
      avdiff::build_schedule(a.stride, a.expand_ratio, a.segments, a.motion_frames,
                             avdiff::AbstractionStrategy::Uniform);
  for (size_t i = 0; i < sch.indices.size(); ++i)
    std::printf("slot %2zu raw_index %3d\n", i, sch.indices[i]);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audio-conditioned latent video diffusion toolkit"};
  app.require_subcommand(1);

  SynthArgs sa;
  CLI::App* synth = app.add_subcommand("synth-data", "Generate a synthetic dataset");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--videos", sa.videos, "Number of videos");
  synth->add_option("--frames", sa.frames, "Frames per video");
  synth->add_option("--fps", sa.fps, "Frame rate");
  synth->add_option("--image-size", sa.image_size, "Square frame size in pixels");
  synth->add_option("--seed", sa.seed, "Generator seed");

  TrainArgs ta;
  CLI::App* train = app.add_subcommand("train", "Train one stage");
  train->add_option("--stage", ta.stage, "1 = spatial+reference, 2 = temporal+audio")
      ->check(CLI::IsMember({1, 2}))
      ->required();
  train->add_option("--data", ta.data_dir, "Dataset directory")->required();
  train->add_option("--out", ta.out, "Checkpoint output path")->required();
  train->add_option("--config", ta.config_path, "JSON config (defaults to desk-scale preset)");
  train->add_option("--init", ta.init_path, "Stage-1 checkpoint to initialize stage 2 from");
  int steps_opt = 0;
  double lr_opt = 0.0;
  auto* steps_flag = train->add_option("--steps", steps_opt, "Override optimizer steps");
  auto* lr_flag = train->add_option("--lr", lr_opt, "Override learning rate");
  train->add_option("--seed", ta.seed, "Training seed (data order, noise, dropout)");

  avdiff::InferenceRequest ir;
  CLI::App* infer = app.add_subcommand("infer", "Generate video from audio + reference image");
  infer->add_option("--checkpoint", ir.checkpoint_path, "Stage-2 checkpoint")->required();
  infer->add_option("--ref", ir.ref_image_path, "Reference PNG")->required();
  infer->add_option("--audio", ir.audio_path, "Driving WAV (16 kHz mono)")->required();
  infer->add_option("--out", ir.out_dir, "Output directory")->required();
  infer->add_option("--seconds", ir.seconds, "Duration to generate (0 = full audio)");
  infer->add_option("--steps", ir.ddim_steps, "Sampler steps");
  infer->add_option("--audio-ratio", ir.ratios.audio, "Audio guidance scale");
  infer->add_option("--ref-ratio", ir.ratios.ref, "Reference guidance scale");
  infer->add_option("--seed", ir.seed, "Sampling-noise seed");

  MetricsArgs ma;
  CLI::App* metrics = app.add_subcommand("metrics", "Motion metrics from keypoint tracks");
  metrics->add_option("--generated", ma.generated, "Generated keypoints (JSONL)")->required();
  metrics->add_option("--reference", ma.reference, "Ground-truth keypoints (JSONL)");
  metrics->add_option("--window", ma.window, "Frames per metric window (0 = whole sequence)");

  ScheduleArgs ga;
  CLI::App* sched = app.add_subcommand("tsm-schedule", "Print the motion-frame segment schedule");
  sched->add_option("--stride", ga.stride, "Abstracted frames per segment");
  sched->add_option("--expand-ratio", ga.expand_ratio, "Segment growth factor");
  sched->add_option("--segments", ga.segments, "Number of segments");
  sched->add_option("--motion-frames", ga.motion_frames, "Raw motion-frame buffer length");

  CLI11_PARSE(app, argc, argv);

  if (steps_flag->count()) ta.steps = steps_opt;
  if (lr_flag->count()) ta.lr = lr_opt;

  try {
    if (synth->parsed()) return run_synth(sa);
    if (train->parsed()) return run_train(ta);
    if (infer->parsed()) return run_infer(ir);
    if (metrics->parsed()) return run_metrics(ma);
    if (sched->parsed()) return run_schedule(ga);
  } catch (const avdiff::Error& e) {
    json err;
    err["error"]["code"] = avdiff::error_code_name(e.code());
    err["error"]["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["error"]["code"] = "Unhandled";
    err["error"]["message"] = e.what();
    std::cerr << err.dump() << "\n";
    return 1;
  }
  return 0;
}
