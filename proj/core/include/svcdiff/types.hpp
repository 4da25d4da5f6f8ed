// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>

namespace svcdiff {

// Row-major frames x features. Rows are independent frames (or independent
// chains for scalar toy problems).
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Noisy data tagged with its diffusion time.
struct LatentState {
  Tensor values;
  double tau = 1.0;
};

struct DataSample {
  Tensor values;
};

// Per-frame conditioning vectors, frames x 256 in the full pipeline.
struct ConditioningTrack {
  Tensor vectors;
};

inline constexpr int kConditioningDim = 256;

}  // namespace svcdiff
