#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace esr {

enum class ErrorCode {
  EmptyTrace,
  OutOfBounds,
  NonMonotoneTime,
  NonFiniteCoordinate,
  InvalidSpacing,
  InvalidGrid,
  EmptyImage,
  ZeroInputVector,
  EmptyDataset,
  DivergedToNonFinite,
  InvalidConfig,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  NonFiniteWeight,
  EmptyCorpus,
  UnsupportedCharacter,
  MissingManifest,
  CorruptTrace,
  SchemaViolation,
  IoError,
};

constexpr std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorCode::InvalidSpacing: return "InvalidSpacing";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::EmptyImage: return "EmptyImage";
    case ErrorCode::ZeroInputVector: return "ZeroInputVector";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DivergedToNonFinite: return "DivergedToNonFinite";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteWeight: return "NonFiniteWeight";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnsupportedCharacter: return "UnsupportedCharacter";
    case ErrorCode::MissingManifest: return "MissingManifest";
    case ErrorCode::CorruptTrace: return "CorruptTrace";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// All library failures surface as esr::Error; code() identifies the failure
// class and what() carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(error_name(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace esr
