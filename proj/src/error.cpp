#include "ctsev/error.hpp"

namespace ctsev {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingHeaderKey: return "MissingHeaderKey";
    case ErrorCode::UnsupportedElementType: return "UnsupportedElementType";
    case ErrorCode::PayloadSizeMismatch: return "PayloadSizeMismatch";
    case ErrorCode::NonLocalData: return "NonLocalData";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::DuplicateSubject: return "DuplicateSubject";
    case ErrorCode::SeverityWithoutPositivity: return "SeverityWithoutPositivity";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CropTooLarge: return "CropTooLarge";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace ctsev
