#include "error.hpp"

namespace dpf {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::EmptyFlow: return "EmptyFlow";
    case ErrorCode::EmptyCorrespondences: return "EmptyCorrespondences";
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonScalarOutput: return "NonScalarOutput";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
    case ErrorCode::DegenerateBounds: return "DegenerateBounds";
    case ErrorCode::IsolatedVertex: return "IsolatedVertex";
    case ErrorCode::MissingRenderer: return "MissingRenderer";
    case ErrorCode::MissingCorrespondences: return "MissingCorrespondences";
    case ErrorCode::ResolutionMismatch: return "ResolutionMismatch";
    case ErrorCode::AtLeastOneTerm: return "AtLeastOneTerm";
    case ErrorCode::BadResolution: return "BadResolution";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Format: return "Format";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
  }
  return "Unknown";
}

}  // namespace dpf
