// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#include "perfseer/error.hpp"

namespace perfseer {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage: return "Usage";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kEmptyGraph: return "EmptyGraph";
    case ErrorCode::kUnsupportedOp: return "UnsupportedOp";
    case ErrorCode::kInvalidGraph: return "InvalidGraph";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kCyclicGraph: return "CyclicGraph";
    case ErrorCode::kNotFitted: return "NotFitted";
    case ErrorCode::kWidthMismatch: return "WidthMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kZeroTarget: return "ZeroTarget";
    case ErrorCode::kStaleTape: return "StaleTape";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
  }
  return "Unknown";
}

int exit_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUsage:
      return 1;
    case ErrorCode::kStaleTape:
    case ErrorCode::kNonFinite:
    case ErrorCode::kDivergedLoss:
      return 3;
    default:
      return 2;
  }
}

}  // namespace perfseer
