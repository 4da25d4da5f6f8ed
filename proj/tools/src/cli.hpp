// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace svcdiff::cli {

enum ExitCode : int { kExitOk = 0, kExitInternal = 1, kExitBadInput = 2 };

// Runs the tool on argv (program name first). Errors are written to `err`
// as a single JSON object.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

}  // namespace svcdiff::cli
