// Copyright 2026 The blockconv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bconv::cli {

enum ExitCode : int {
    kOk = 0,
    kMismatch = 1,
    kInfeasible = 2,
    kInputError = 3,
};

/// Runs `blockconv <args...>` (args excludes the program name) and returns the
/// exit code. Normal output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace bconv::cli
