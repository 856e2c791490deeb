#include "avdiff/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "avdiff/errors.hpp"

namespace avdiff {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'A', 'V', 'C', 'P'};

void put_u32_le(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64_le(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64_le(std::string& out, double d) {
  uint64_t bits;
  std::memcpy(&bits, &d, 8);
  put_u64_le(out, bits);
}

uint32_t read_u32_le(const unsigned char* p) {
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(p[i]) << (8 * i);
  return v;
}

uint64_t read_u64_le(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(p[i]) << (8 * i);
  return v;
}

double read_f64_le(const unsigned char* p) {
  uint64_t bits = read_u64_le(p);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& cfg, int stage,
                     const nn::ParamStore& params) {
  json header;
  header["version"] = kCheckpointVersion;
  header["stage"] = stage;
  header["config"] = json::parse(config_to_json(cfg));
  json tensors = json::array();
  std::string payload;
  uint64_t offset = 0;
  for (const std::string& name : params.names()) {
    Tensor t = params.get(name);
    json jt;
    jt["name"] = name;
    jt["shape"] = t.shape();
    jt["offset"] = offset;
    jt["count"] = t.size();
    tensors.push_back(std::move(jt));
    for (int64_t i = 0; i < t.size(); ++i) put_f64_le(payload, t.data()[i]);
    offset += uint64_t(t.size());
  }
  header["tensors"] = std::move(tensors);
  std::string header_str = header.dump();

  std::string blob;
  blob.append(kMagic, 4);
  put_u32_le(blob, kCheckpointVersion);
  put_u64_le(blob, header_str.size());
  blob += header_str;
  blob += payload;

  fs::path target(path);
  fs::path dir = target.parent_path();
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(ErrorCode::IoError, "cannot create checkpoint directory: " + dir.string());
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::IoError, "cannot open checkpoint for writing: " + tmp.string());
    out.write(blob.data(), std::streamsize(blob.size()));
    if (!out) raise(ErrorCode::IoError, "short write to checkpoint: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) raise(ErrorCode::IoError, "cannot move checkpoint into place: " + target.string());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open checkpoint: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(blob.data());

  check(blob.size() >= 16, ErrorCode::ParseError, "checkpoint truncated before header");
  check(std::memcmp(blob.data(), kMagic, 4) == 0, ErrorCode::ParseError,
        "not a checkpoint file (bad magic)");
  uint32_t version = read_u32_le(p + 4);
  check(version == kCheckpointVersion, ErrorCode::CheckpointMismatch,
        "unsupported checkpoint version " + std::to_string(version));
  uint64_t header_len = read_u64_le(p + 8);
  check(blob.size() >= 16 + header_len, ErrorCode::ParseError, "checkpoint header truncated");

  json header;
  try {
    header = json::parse(blob.substr(16, header_len));
  } catch (const std::exception& e) {
    raise(ErrorCode::ParseError, std::string("bad checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  const unsigned char* payload = p + 16 + header_len;
  uint64_t payload_count = (blob.size() - 16 - header_len) / 8;
  try {
    ck.stage = header.at("stage").get<int>();
    ck.config = parse_config_json(header.at("config").dump());
    for (const auto& jt : header.at("tensors")) {
      std::string name = jt.at("name").get<std::string>();
      auto shape = jt.at("shape").get<Shape>();
      uint64_t offset = jt.at("offset").get<uint64_t>();
      uint64_t count = jt.at("count").get<uint64_t>();
      int64_t expect = 1;
      for (int d : shape) expect *= d;
      check(uint64_t(expect) == count, ErrorCode::ParseError,
            "checkpoint tensor count disagrees with its shape: " + name);
      check(offset + count <= payload_count, ErrorCode::ParseError,
            "checkpoint payload truncated at tensor: " + name);
      std::vector<double> values(count);
      for (uint64_t i = 0; i < count; ++i)
        values[i] = read_f64_le(payload + (offset + i) * 8);
      ck.tensors.emplace(name, Tensor::from(shape, values));
    }
  } catch (const json::exception& e) {
    raise(ErrorCode::ParseError, std::string("bad checkpoint header: ") + e.what());
  }
  return ck;
}

void apply_checkpoint(const Checkpoint& ck, nn::ParamStore& params, bool strict) {
  for (const auto& [name, tensor] : ck.tensors) {
    check(params.contains(name), ErrorCode::CheckpointMismatch,
          "checkpoint tensor has no matching parameter: " + name);
    // Tensor handles share storage, so writing through the copy updates the
    // live parameter in place without touching its autograd node.
    Tensor dst = params.get(name);
    check(dst.shape() == tensor.shape(), ErrorCode::CheckpointMismatch,
          "checkpoint tensor shape differs from parameter: " + name);
    std::copy(tensor.data().begin(), tensor.data().end(), dst.data().begin());
  }
  if (strict) {
    for (const std::string& name : params.names())
      check(ck.tensors.count(name) != 0, ErrorCode::CheckpointMismatch,
            "checkpoint does not cover parameter: " + name);
  }
}

}  // namespace avdiff
