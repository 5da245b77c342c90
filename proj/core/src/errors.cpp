#include "nrp/errors.hpp"

namespace nrp {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicatePatientId: return "DuplicatePatientId";
    case ErrorCode::MissingMaskForSequence: return "MissingMaskForSequence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnsupportedBitDepth: return "UnsupportedBitDepth";
    case ErrorCode::EmptyStack: return "EmptyStack";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::NoOnset: return "NoOnset";
    case ErrorCode::WindowTooShort: return "WindowTooShort";
    case ErrorCode::ZeroPeak: return "ZeroPeak";
    case ErrorCode::ZeroMean: return "ZeroMean";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::DegenerateLength: return "DegenerateLength";
    case ErrorCode::MissingSignal: return "MissingSignal";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::AllZeroDifferences: return "AllZeroDifferences";
    case ErrorCode::OutOfRangeP: return "OutOfRangeP";
    case ErrorCode::DegenerateMargins: return "DegenerateMargins";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::PatientSetMismatch: return "PatientSetMismatch";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::MissingCovariate: return "MissingCovariate";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::InvalidShape: return "InvalidShape";
    case ErrorCode::DegenerateConfig: return "DegenerateConfig";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "UnknownError";
}

}  // namespace nrp
