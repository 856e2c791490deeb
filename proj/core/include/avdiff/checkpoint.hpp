#pragma once

#include <map>
#include <string>

#include "avdiff/config.hpp"
#include "avdiff/nn.hpp"
#include "avdiff/tensor.hpp"

namespace avdiff {

// Binary weight snapshot. Layout:
//   bytes 0..3   magic "AVCP"
//   bytes 4..7   format version, u32 little-endian
//   bytes 8..15  JSON header length in bytes, u64 little-endian
//   header       UTF-8 JSON: {version, stage, config, tensors:[{name, shape,
//                offset, count}]} where offset/count index into the payload
//   payload      all tensor values as float64 little-endian, concatenated
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  int stage = 0;
  std::map<std::string, Tensor> tensors;
};

// Writes to a temp file in the target directory, then renames into place, so a
// crash mid-write never leaves a truncated checkpoint at `path`.
void save_checkpoint(const std::string& path, const RunConfig& cfg, int stage,
                     const nn::ParamStore& params);

Checkpoint load_checkpoint(const std::string& path);

// Copies checkpoint tensors into matching parameters. Every checkpoint tensor
// must exist in the store with an identical shape; with strict=true the
// checkpoint must also cover every parameter in the store.
void apply_checkpoint(const Checkpoint& ck, nn::ParamStore& params, bool strict = true);

}  // namespace avdiff
