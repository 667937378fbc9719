// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace perfseer {

enum class ErrorCode {
  kUsage,
  kIo,
  kParse,
  kEmptyGraph,
  kUnsupportedOp,
  kInvalidGraph,
  kShapeMismatch,
  kCyclicGraph,
  kNotFitted,
  kWidthMismatch,
  kLengthMismatch,
  kTooSmall,
  kZeroTarget,
  kStaleTape,
  kNonFinite,
  kDivergedLoss,
};

std::string_view to_string(ErrorCode code);

// Process exit status for the CLI: 1 usage, 2 data, 3 numeric.
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace perfseer
