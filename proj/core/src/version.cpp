// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/version.hpp"

#include <Eigen/Core>
#include <fftw3.h>

namespace svcdiff {

std::string version() { return SVCDIFF_VERSION; }

std::vector<std::pair<std::string, std::string>> component_versions() {
  const auto n = [](int v) { return std::to_string(v); };
  std::string compiler;
#if defined(__clang__)
  compiler = "clang " __clang_version__;
#elif defined(__GNUC__)
  compiler = "gcc " + n(__GNUC__) + "." + n(__GNUC_MINOR__) + "." + n(__GNUC_PATCHLEVEL__);
#else
  compiler = "unknown";
#endif
  return {{"svcdiff", version()},
          {"compiler", compiler},
          {"cxx_standard", n(static_cast<int>(__cplusplus))},
          {"eigen", n(EIGEN_WORLD_VERSION) + "." + n(EIGEN_MAJOR_VERSION) + "." + n(EIGEN_MINOR_VERSION)},
          {"fftw", fftw_version}};
}

}  // namespace svcdiff
