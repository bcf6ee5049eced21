#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace elgrid {

enum class ErrorCode {
  InvalidArgument,
  IoError,
  UnsupportedFormat,
  NoModuleFound,
  DegenerateBox,
  AmbiguousOrientation,
  PointAtInfinity,
  DegenerateConfiguration,
  InsufficientConsensus,
  PatchOutsideImage,
  InvalidSceneSpec,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::NoModuleFound: return "NoModuleFound";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::AmbiguousOrientation: return "AmbiguousOrientation";
    case ErrorCode::PointAtInfinity: return "PointAtInfinity";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientConsensus: return "InsufficientConsensus";
    case ErrorCode::PatchOutsideImage: return "PatchOutsideImage";
    case ErrorCode::InvalidSceneSpec: return "InvalidSceneSpec";
  }
  return "Unknown";
}

/// Library-wide error type. `stage` names the pipeline stage that raised it,
/// empty for errors thrown outside the end-to-end pipeline.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message, std::string stage = {})
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code),
        message_(message),
        stage_(std::move(stage)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }
  const std::string& stage() const noexcept { return stage_; }

private:
  ErrorCode code_;
  std::string message_;
  std::string stage_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message,
                               std::string stage = {}) {
  throw Error(code, message, std::move(stage));
}

}  // namespace elgrid
