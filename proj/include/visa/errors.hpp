#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace visa {

enum class ErrorCode {
  NoFrames,
  ResolutionMismatch,
  InvalidTarget,
  CorruptBundle,
  InvalidConfig,
  ShapeError,
  InsufficientData,
  InvalidAlpha,
  InvalidFactor,
  InvalidK,
  InvalidRadius,
  EmptySelection,
  InvalidIterations,
  NotFitted,
  InvalidPath,
  InvalidRect,
  NotAPacket,
  CorruptPacket,
  WrongModel,
  BadImage,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the toolkit; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace visa
