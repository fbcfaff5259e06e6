#pragma once

#include <stdexcept>
#include <string>

namespace tumorseg {

enum class ErrorCode {
  Io,
  BadMagic,
  BadHeader,
  UnsupportedDatatype,
  BadDimension,
  Truncated,
  DimensionMismatch,
  InvalidArgument,
  EmptyForeground,
  DegenerateIntensity,
  ShapeMismatch,
  ChannelMismatch,
  OutOfBounds,
  NotEnoughPoints,
  EmptyTrainingSet,
  UntrainedForest,
  FeatureCountMismatch,
  NoTumorInTraining,
  MissingLabels,
  ConfigParse,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "Io";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::BadDimension: return "BadDimension";
    case ErrorCode::Truncated: return "Truncated";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyForeground: return "EmptyForeground";
    case ErrorCode::DegenerateIntensity: return "DegenerateIntensity";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::NotEnoughPoints: return "NotEnoughPoints";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::UntrainedForest: return "UntrainedForest";
    case ErrorCode::FeatureCountMismatch: return "FeatureCountMismatch";
    case ErrorCode::NoTumorInTraining: return "NoTumorInTraining";
    case ErrorCode::MissingLabels: return "MissingLabels";
    case ErrorCode::ConfigParse: return "ConfigParse";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can tell error kinds apart without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tumorseg
