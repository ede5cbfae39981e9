#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace worldmesh {

enum class ErrorCode {
  kInsetCollapse,
  kNonManifoldInput,
  kEmptyMesh,
  kSchemaError,
  kInvariantError,
  kExhaustedAttempts,
  kOpeningOutsideWall,
  kIoError,
  kNoFreeSpace,
  kZeroQuaternion,
  kBadRange,
  kMissingObjectTexture,
  kBehindCamera,
  kDimensionMismatch,
  kDegenerateObb,
  kNoSupportFound,
  kNoWallFound,
  kUnresolvableOverlap,
  kAdapterFailure,
  kNoValidDepthPixels,
  kMissingPriorArtifact,
  kVerificationExhausted,
  kInvalidArgument,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so callers
// (and the CLI exit-code mapping) can dispatch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace worldmesh
