#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cvbn {

enum class ErrorKind {
  CycleDetected,
  MissingCpt,
  DuplicateCpt,
  RowNotNormalized,
  ArityMismatch,
  InvalidVariable,
  UnknownVariable,
  UnknownState,
  QueryObserved,
  StateSpaceTooLarge,
  InconsistentEvidence,
  DegenerateMetric,
  UnnormalizedInput,
  NonPositiveGap,
  CollisionDetected,
  InvalidConfig,
  ParseError,
  ReplicationsFailed,
  CorruptManifest,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::CycleDetected: return "CycleDetected";
    case ErrorKind::MissingCpt: return "MissingCpt";
    case ErrorKind::DuplicateCpt: return "DuplicateCpt";
    case ErrorKind::RowNotNormalized: return "RowNotNormalized";
    case ErrorKind::ArityMismatch: return "ArityMismatch";
    case ErrorKind::InvalidVariable: return "InvalidVariable";
    case ErrorKind::UnknownVariable: return "UnknownVariable";
    case ErrorKind::UnknownState: return "UnknownState";
    case ErrorKind::QueryObserved: return "QueryObserved";
    case ErrorKind::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorKind::InconsistentEvidence: return "InconsistentEvidence";
    case ErrorKind::DegenerateMetric: return "DegenerateMetric";
    case ErrorKind::UnnormalizedInput: return "UnnormalizedInput";
    case ErrorKind::NonPositiveGap: return "NonPositiveGap";
    case ErrorKind::CollisionDetected: return "CollisionDetected";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ReplicationsFailed: return "ReplicationsFailed";
    case ErrorKind::CorruptManifest: return "CorruptManifest";
  }
  return "Unknown";
}

// All library failures are reported through this type. what() reads
// "<Kind>: <detail>" so callers can print it verbatim.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
        kind_(kind),
        detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace cvbn
