//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chemlm {

enum class ErrorCode {
  kIo,
  kFormatVersionMismatch,
  kShapeMismatch,
  kContextOverflow,
  kNonFiniteLoss,
  kWidthMismatch,
  kSpanOutOfBounds,
  kInvalidArgument,
  kConfig,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
  case ErrorCode::kIo:
    return "IoError";
  case ErrorCode::kFormatVersionMismatch:
    return "FormatVersionMismatch";
  case ErrorCode::kShapeMismatch:
    return "ShapeMismatch";
  case ErrorCode::kContextOverflow:
    return "ContextOverflow";
  case ErrorCode::kNonFiniteLoss:
    return "NonFiniteLoss";
  case ErrorCode::kWidthMismatch:
    return "WidthMismatch";
  case ErrorCode::kSpanOutOfBounds:
    return "SpanOutOfBounds";
  case ErrorCode::kInvalidArgument:
    return "InvalidArgument";
  case ErrorCode::kConfig:
    return "ConfigError";
  }
  return "Unknown";
}

class Error: public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) { }

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace chemlm
