// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "svcdiff/types.hpp"

namespace svcdiff {

// Counter-based generator: the n-th draw of (seed, stream) is a pure function
// of (seed, stream, n), so any stochastic operation can be replayed by
// re-creating the generator. Not cryptographic.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller.
  double normal() noexcept;
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  Tensor normal_tensor(Eigen::Index rows, Eigen::Index cols);

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace svcdiff
