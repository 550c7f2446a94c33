#pragma once

#include <stdexcept>
#include <string>

namespace dpf {

enum class ErrorCode {
  InvalidArgument,
  EmptyMesh,
  EmptyIndex,
  EmptySet,
  EmptyFlow,
  EmptyCorrespondences,
  EmptyNeighborhood,
  LengthMismatch,
  ShapeMismatch,
  IndexOutOfRange,
  NonScalarOutput,
  NonFiniteValue,
  NonFiniteInput,
  NonFiniteGradient,
  NonFiniteLoss,
  DegenerateNeighborhood,
  DegenerateBounds,
  IsolatedVertex,
  MissingRenderer,
  MissingCorrespondences,
  ResolutionMismatch,
  AtLeastOneTerm,
  BadResolution,
  Io,
  Parse,
  Format,
  UnknownKey,
  UnsupportedFeature,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace dpf
