#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace veg {

enum class ErrorCode {
  NoObjects,
  MissingEntity,
  GraphMismatch,
  LengthMismatch,
  InvalidMeta,
  ParseError,
  ValidationError,
  IoError,
  DemoFailed,
  MissingHand,
  InsufficientData,
  NonPSD,
  InvalidConfig,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoObjects: return "NoObjects";
    case ErrorCode::MissingEntity: return "MissingEntity";
    case ErrorCode::GraphMismatch: return "GraphMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidMeta: return "InvalidMeta";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DemoFailed: return "DemoFailed";
    case ErrorCode::MissingHand: return "MissingHand";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::NonPSD: return "NonPSD";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace veg
