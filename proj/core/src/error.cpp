#include "worldmesh/error.hpp"

namespace worldmesh {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInsetCollapse: return "InsetCollapse";
    case ErrorCode::kNonManifoldInput: return "NonManifoldInput";
    case ErrorCode::kEmptyMesh: return "EmptyMesh";
    case ErrorCode::kSchemaError: return "SchemaError";
    case ErrorCode::kInvariantError: return "InvariantError";
    case ErrorCode::kExhaustedAttempts: return "ExhaustedAttempts";
    case ErrorCode::kOpeningOutsideWall: return "OpeningOutsideWall";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kNoFreeSpace: return "NoFreeSpace";
    case ErrorCode::kZeroQuaternion: return "ZeroQuaternion";
    case ErrorCode::kBadRange: return "BadRange";
    case ErrorCode::kMissingObjectTexture: return "MissingObjectTexture";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateObb: return "DegenerateObb";
    case ErrorCode::kNoSupportFound: return "NoSupportFound";
    case ErrorCode::kNoWallFound: return "NoWallFound";
    case ErrorCode::kUnresolvableOverlap: return "UnresolvableOverlap";
    case ErrorCode::kAdapterFailure: return "AdapterFailure";
    case ErrorCode::kNoValidDepthPixels: return "NoValidDepthPixels";
    case ErrorCode::kMissingPriorArtifact: return "MissingPriorArtifact";
    case ErrorCode::kVerificationExhausted: return "VerificationExhausted";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace worldmesh
