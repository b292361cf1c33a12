// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dlcz::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kIo = 2 };

/// Entry point shared by the executable and the tests. `args[0]` is the
/// program name. Returns the process exit code.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace dlcz::cli
