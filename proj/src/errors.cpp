#include "logora/errors.hpp"

namespace logora {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kBadConfig: return "BadConfig";
    case ErrorCode::kEmpty: return "Empty";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kClassMismatch: return "ClassMismatch";
    case ErrorCode::kNoPrototypes: return "NoPrototypes";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kMissingLabels: return "MissingLabels";
    case ErrorCode::kFormatError: return "FormatError";
    case ErrorCode::kMetaMismatch: return "MetaMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace logora
