// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace svcdiff {

std::string version();

// (component, version) pairs for reproducibility records: svcdiff itself,
// the compiler and the numeric libraries linked into the core.
std::vector<std::pair<std::string, std::string>> component_versions();

}  // namespace svcdiff
