#include "avdiff/errors.hpp"

namespace avdiff {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::ScheduleOverrun: return "ScheduleOverrun";
    case ErrorCode::NonPositiveDim: return "NonPositiveDim";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingCacheEntry: return "MissingCacheEntry";
    case ErrorCode::TOutOfRange: return "TOutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::EmptyAudio: return "EmptyAudio";
    case ErrorCode::UnsupportedSampleRate: return "UnsupportedSampleRate";
    case ErrorCode::TooFewFrames: return "TooFewFrames";
    case ErrorCode::FrameCountMismatch: return "FrameCountMismatch";
    case ErrorCode::UnknownConditionTag: return "UnknownConditionTag";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "UnknownError";
}

}  // namespace avdiff
