// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/rng.hpp"

#include <cmath>
#include <numbers>

namespace svcdiff {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream * 0xD1B54A32D192ED03ULL + 1))) {}

std::uint64_t CounterRng::next_u64() noexcept {
  return splitmix64(key_ + 0x9E3779B97F4A7C15ULL * (counter_++));
}

double CounterRng::uniform() noexcept {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
  // Multiply-shift reduction; bias is negligible for the small n used here.
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Tensor CounterRng::normal_tensor(Eigen::Index rows, Eigen::Index cols) {
  Tensor out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = normal();
  return out;
}

}  // namespace svcdiff
