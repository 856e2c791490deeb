#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace avdiff {

// SHA-256 of a byte string, returned as lowercase hex.
std::string sha256_hex(const std::string& data);
std::string sha256_hex(const std::vector<uint8_t>& data);

// SHA-256 of a file's contents; throws IoError if unreadable.
std::string file_sha256(const std::string& path);

}  // namespace avdiff
