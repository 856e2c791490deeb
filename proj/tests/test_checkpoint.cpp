#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "avdiff/checkpoint.hpp"
#include "avdiff/errors.hpp"
#include "avdiff/model.hpp"
#include "test_util.hpp"

using namespace avdiff;
using avdiff_test::bitwise_equal;
using avdiff_test::TempDir;

namespace {

nn::ParamStore make_store(uint64_t seed) {
  nn::ParamStore ps;
  Rng rng(seed);
  ps.add("a.w", Tensor::randn({3, 4}, rng));
  ps.add("a.b", Tensor::randn({4}, rng));
  ps.add("deep.block.gamma", Tensor::randn({2, 2, 2}, rng));
  return ps;
}

}  // namespace

TEST_CASE("checkpoint round-trip preserves every tensor bitwise") {
  TempDir dir("ckpt_rt");
  nn::ParamStore ps = make_store(1);
  RunConfig cfg = toy_preset();
  cfg.model.seed = 77;
  cfg.train.lr = 3.25e-4;

  std::string path = dir.file("model.ckpt");
  save_checkpoint(path, cfg, /*stage=*/2, ps);
  Checkpoint ck = load_checkpoint(path);

  CHECK(ck.stage == 2);
  CHECK(ck.config == cfg);
  REQUIRE(ck.tensors.size() == 3);
  for (const std::string& name : ps.names()) {
    REQUIRE(ck.tensors.count(name) == 1);
    CHECK(bitwise_equal(ck.tensors.at(name), ps.get(name)));
  }
}

TEST_CASE("apply copies values into a matching store") {
  TempDir dir("ckpt_apply");
  nn::ParamStore src = make_store(2);
  std::string path = dir.file("w.ckpt");
  save_checkpoint(path, toy_preset(), 1, src);

  nn::ParamStore dst = make_store(99);  // same names/shapes, different values
  CHECK_FALSE(bitwise_equal(dst.get("a.w"), src.get("a.w")));
  apply_checkpoint(load_checkpoint(path), dst, /*strict=*/true);
  for (const std::string& name : src.names())
    CHECK(bitwise_equal(dst.get(name), src.get(name)));
}

TEST_CASE("apply rejects shape mismatches and unknown tensors") {
  TempDir dir("ckpt_bad");
  nn::ParamStore src = make_store(3);
  std::string path = dir.file("w.ckpt");
  save_checkpoint(path, toy_preset(), 1, src);
  Checkpoint ck = load_checkpoint(path);

  {  // same names, one wrong shape
    nn::ParamStore dst;
    Rng rng(4);
    dst.add("a.w", Tensor::randn({4, 3}, rng));  // transposed
    dst.add("a.b", Tensor::randn({4}, rng));
    dst.add("deep.block.gamma", Tensor::randn({2, 2, 2}, rng));
    try {
      apply_checkpoint(ck, dst, false);
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CheckpointMismatch);
    }
  }
  {  // store is missing one checkpoint tensor
    nn::ParamStore dst;
    Rng rng(5);
    dst.add("a.w", Tensor::randn({3, 4}, rng));
    dst.add("a.b", Tensor::randn({4}, rng));
    try {
      apply_checkpoint(ck, dst, false);
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::CheckpointMismatch);
    }
  }
}

TEST_CASE("non-strict apply tolerates extra parameters in the store") {
  // the stage-1 -> stage-2 flow: the stage-2 store has every stage-1 name
  // plus fresh temporal/bank parameters the checkpoint does not know about
  TempDir dir("ckpt_partial");
  nn::ParamStore stage1 = make_store(6);
  std::string path = dir.file("s1.ckpt");
  save_checkpoint(path, toy_preset(), 1, stage1);

  nn::ParamStore stage2 = make_store(7);
  Rng rng(8);
  Tensor extra = stage2.add("new.temporal.w", Tensor::randn({5, 5}, rng));
  Tensor extra_before = extra.detach();

  Checkpoint ck = load_checkpoint(path);
  CHECK_THROWS_AS(apply_checkpoint(ck, stage2, /*strict=*/true), Error);
  apply_checkpoint(ck, stage2, /*strict=*/false);
  for (const std::string& name : stage1.names())
    CHECK(bitwise_equal(stage2.get(name), stage1.get(name)));
  CHECK(bitwise_equal(stage2.get("new.temporal.w"), extra_before));  // untouched
}

TEST_CASE("corrupt files are rejected with a parse error") {
  TempDir dir("ckpt_corrupt");
  nn::ParamStore ps = make_store(9);
  std::string path = dir.file("w.ckpt");
  save_checkpoint(path, toy_preset(), 1, ps);

  {  // wrong magic
    std::string bad = dir.file("bad_magic.ckpt");
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes[0] = 'X';
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.close();
    try {
      (void)load_checkpoint(bad);
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ParseError);
    }
  }
  {  // truncated payload
    std::string bad = dir.file("truncated.ckpt");
    std::ifstream in(path, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    bytes.resize(bytes.size() - 16);
    std::ofstream out(bad, std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.close();
    CHECK_THROWS_AS((void)load_checkpoint(bad), Error);
  }
  {  // missing file
    try {
      (void)load_checkpoint(dir.file("nope.ckpt"));
      FAIL("expected a throw");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::IoError);
    }
  }
}

TEST_CASE("saving leaves no temporary files behind") {
  TempDir dir("ckpt_tmp");
  nn::ParamStore ps = make_store(10);
  save_checkpoint(dir.file("w.ckpt"), toy_preset(), 1, ps);
  int n_files = 0;
  bool only_ckpt = true;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) {
    ++n_files;
    only_ckpt = only_ckpt && entry.path().filename() == "w.ckpt";
  }
  CHECK(n_files == 1);
  CHECK(only_ckpt);
  // overwrite works and still leaves exactly one file
  save_checkpoint(dir.file("w.ckpt"), toy_preset(), 2, ps);
  CHECK(load_checkpoint(dir.file("w.ckpt")).stage == 2);
}

TEST_CASE("a full model survives the save/apply cycle") {
  TempDir dir("ckpt_model");
  RunConfig run = toy_preset();
  DiffusionModel m1(run.model, /*temporal_audio=*/true, /*init_seed=*/5);
  Rng prng(6);
  avdiff_test::perturb_params(m1.params(), prng);
  std::string path = dir.file("full.ckpt");
  save_checkpoint(path, run, 2, m1.params());

  DiffusionModel m2(run.model, /*temporal_audio=*/true, /*init_seed=*/999);
  apply_checkpoint(load_checkpoint(path), m2.params(), /*strict=*/true);

  Rng rng(7);
  ConditionBundle cond;
  cond.ref_latent = Tensor::randn({run.model.latent_channels, run.model.latent_height,
                                   run.model.latent_width},
                                  rng);
  cond.motion_frames = Tensor::randn({run.model.motion_frame_len, run.model.latent_channels,
                                      run.model.latent_height, run.model.latent_width},
                                     rng);
  cond.audio_embed = Tensor::randn({run.model.clip_len, 5, run.model.audio_feature_dim}, rng);
  Tensor x = Tensor::randn({run.model.clip_len, run.model.latent_channels,
                            run.model.latent_height, run.model.latent_width},
                           rng);
  CHECK(bitwise_equal(m1.denoise(x, 3, cond, nullptr), m2.denoise(x, 3, cond, nullptr)));
}
