#include "avdiff/wav_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "avdiff/errors.hpp"

namespace avdiff {

namespace {

uint32_t rd_u32(const uint8_t* p) {
  return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0]) | uint16_t(p[1]) << 8; }

void wr_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(uint8_t(v));
  b.push_back(uint8_t(v >> 8));
  b.push_back(uint8_t(v >> 16));
  b.push_back(uint8_t(v >> 24));
}
void wr_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(uint8_t(v));
  b.push_back(uint8_t(v >> 8));
}

}  // namespace

AudioTrack read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::IoError, "cannot open wav file: " + path);
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    raise(ErrorCode::ParseError, "not a RIFF/WAVE file: " + path);

  AudioTrack track;
  bool got_fmt = false;
  size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    const uint8_t* hdr = buf.data() + pos;
    uint32_t chunk_len = rd_u32(hdr + 4);
    size_t body = pos + 8;
    if (body + chunk_len > buf.size())
      raise(ErrorCode::ParseError, "truncated wav chunk in " + path);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (chunk_len < 16) raise(ErrorCode::ParseError, "short fmt chunk in " + path);
      uint16_t format = rd_u16(buf.data() + body);
      uint16_t channels = rd_u16(buf.data() + body + 2);
      uint32_t rate = rd_u32(buf.data() + body + 4);
      uint16_t bits = rd_u16(buf.data() + body + 14);
      if (format != 1 || bits != 16)
        raise(ErrorCode::ParseError, "only 16-bit PCM wav is supported: " + path);
      if (channels != 1) raise(ErrorCode::ParseError, "only mono wav is supported: " + path);
      track.sample_rate = static_cast<int>(rate);
      got_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!got_fmt) raise(ErrorCode::ParseError, "data chunk before fmt in " + path);
      size_t n = chunk_len / 2;
      track.samples.resize(n);
      for (size_t i = 0; i < n; ++i) {
        int16_t s = static_cast<int16_t>(rd_u16(buf.data() + body + 2 * i));
        track.samples[i] = double(s) / 32768.0;
      }
      return track;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  raise(ErrorCode::ParseError, "wav file has no data chunk: " + path);
}

void write_wav(const std::string& path, const AudioTrack& track) {
  check(track.sample_rate > 0, ErrorCode::InvalidConfig, "wav sample_rate must be positive");
  std::vector<uint8_t> b;
  size_t n = track.samples.size();
  uint32_t data_len = static_cast<uint32_t>(n * 2);

  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  wr_u32(b, 36 + data_len);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  wr_u32(b, 16);
  wr_u16(b, 1);  // PCM
  wr_u16(b, 1);  // mono
  wr_u32(b, uint32_t(track.sample_rate));
  wr_u32(b, uint32_t(track.sample_rate) * 2);  // byte rate
  wr_u16(b, 2);                                // block align
  wr_u16(b, 16);                               // bits
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  wr_u32(b, data_len);
  for (size_t i = 0; i < n; ++i) {
    double v = std::clamp(track.samples[i], -1.0, 1.0);
    int16_t s = static_cast<int16_t>(std::lround(v * 32767.0));
    wr_u16(b, static_cast<uint16_t>(s));
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::IoError, "cannot write wav file: " + path);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!out) raise(ErrorCode::IoError, "short write to wav file: " + path);
}

}  // namespace avdiff
