#pragma once

#include <stdexcept>
#include <string>

namespace salsanext {

enum class ErrorCode {
  MalformedScan,
  InvalidPoint,
  LabelMismatch,
  UnknownClass,
  InvalidSpec,
  MissingLabels,
  DegeneratePoint,
  EmptyProjection,
  Dimension,
  StaleState,
  InvalidDistribution,
  Config,
  IncompatibleCheckpoint,
  CorruptCheckpoint,
  InvalidTarget,
  EmptyBatch,
  InvalidTrials,
  EmptyCandidates,
  EmptyDataset,
  UndefinedMetric,
  LengthMismatch,
  Io,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedScan: return "malformed-scan";
    case ErrorCode::InvalidPoint: return "invalid-point";
    case ErrorCode::LabelMismatch: return "label-mismatch";
    case ErrorCode::UnknownClass: return "unknown-class";
    case ErrorCode::InvalidSpec: return "invalid-spec";
    case ErrorCode::MissingLabels: return "missing-labels";
    case ErrorCode::DegeneratePoint: return "degenerate-point";
    case ErrorCode::EmptyProjection: return "empty-projection";
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::StaleState: return "stale-state";
    case ErrorCode::InvalidDistribution: return "invalid-distribution";
    case ErrorCode::Config: return "config";
    case ErrorCode::IncompatibleCheckpoint: return "incompatible-checkpoint";
    case ErrorCode::CorruptCheckpoint: return "corrupt-checkpoint";
    case ErrorCode::InvalidTarget: return "invalid-target";
    case ErrorCode::EmptyBatch: return "empty-batch";
    case ErrorCode::InvalidTrials: return "invalid-trials";
    case ErrorCode::EmptyCandidates: return "empty-candidates";
    case ErrorCode::EmptyDataset: return "empty-dataset";
    case ErrorCode::UndefinedMetric: return "undefined-metric";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace salsanext
