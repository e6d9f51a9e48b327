#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace morphmap {

enum class ErrorCode {
  ZeroVector,
  DimMismatch,
  AntipodalInputs,
  InvalidArgument,
  InvalidConfig,
  DuplicateKey,
  Io,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  NonFiniteValue,
  InsufficientSubjects,
  NotEnoughPairs,
  EmptyStore,
  MissingProbes,
  EmptyScores,
  InvalidTarget,
  InsufficientProbes,
  EmptyOutcomes,
  EmptyStudy,
  ZeroVariance,
  MissingArtifact,
};

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::AntipodalInputs: return "AntipodalInputs";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InsufficientSubjects: return "InsufficientSubjects";
    case ErrorCode::NotEnoughPairs: return "NotEnoughPairs";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::MissingProbes: return "MissingProbes";
    case ErrorCode::EmptyScores: return "EmptyScores";
    case ErrorCode::InvalidTarget: return "InvalidTarget";
    case ErrorCode::InsufficientProbes: return "InsufficientProbes";
    case ErrorCode::EmptyOutcomes: return "EmptyOutcomes";
    case ErrorCode::EmptyStudy: return "EmptyStudy";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so that
/// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace morphmap
