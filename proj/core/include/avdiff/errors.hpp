#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace avdiff {

enum class ErrorCode {
  InvalidConfig,
  ScheduleOverrun,
  NonPositiveDim,
  ShapeMismatch,
  MissingCacheEntry,
  TOutOfRange,
  NonFiniteLoss,
  CheckpointMismatch,
  EmptyAudio,
  UnsupportedSampleRate,
  TooFewFrames,
  FrameCountMismatch,
  UnknownConditionTag,
  IoError,
  ParseError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Thrown by config validation; collects every violated invariant.
/// code() reports the category of the first violation.
class ConfigValidationError : public Error {
 public:
  ConfigValidationError(ErrorCode first, std::vector<std::string> violations)
      : Error(first, join(violations)), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) out += "; ";
      out += v[i];
    }
    return out;
  }
  std::vector<std::string> violations_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void check(bool cond, ErrorCode code, const std::string& msg) {
  if (!cond) raise(code, msg);
}

}  // namespace avdiff
