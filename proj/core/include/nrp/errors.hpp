#pragma once

#include <stdexcept>
#include <string>

namespace nrp {

enum class ErrorCode {
  MissingFile,
  ParseError,
  DuplicatePatientId,
  MissingMaskForSequence,
  DimensionMismatch,
  UnsupportedBitDepth,
  EmptyStack,
  EmptyMask,
  NoOnset,
  WindowTooShort,
  ZeroPeak,
  ZeroMean,
  ZeroVariance,
  DegenerateLength,
  MissingSignal,
  EmptySample,
  AllZeroDifferences,
  OutOfRangeP,
  DegenerateMargins,
  SingleClass,
  SingleClassTraining,
  NonFiniteFeature,
  PatientSetMismatch,
  EmptyGrid,
  MissingCovariate,
  EmptyClass,
  InvalidShape,
  DegenerateConfig,
  IoError,
  UsageError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace nrp
