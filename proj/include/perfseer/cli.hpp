// Copyright 2026 The perfseer Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace perfseer {

inline constexpr const char* kToolkitVersion = "1.0.0";

// Runs one command line (args excludes the program name). Returns the exit
// status: 0 success, 1 usage error, 2 data error, 3 numeric failure. Errors
// go to `err` as "error[<Code>]: <message>".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace perfseer
