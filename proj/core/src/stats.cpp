// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "svcdiff/error.hpp"

namespace svcdiff {

double quantile(std::span<const double> values, double q) {
  if (values.empty()) throw Error(Errc::kInvalidArgument, "quantile of an empty set");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::kInvalidArgument, "mean of an empty set");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double stddev(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

namespace {

double mean_pairwise(const Tensor& a, const Tensor& b, bool same) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (Eigen::Index j = same ? i + 1 : 0; j < b.rows(); ++j) row += (a.row(i) - b.row(j)).norm();
    total += row;
  }
  const double n = static_cast<double>(a.rows());
  const double m = static_cast<double>(b.rows());
  return same ? total / (n * (n - 1) / 2.0) : total / (n * m);
}

}  // namespace

double energy_distance(const Tensor& a, const Tensor& b) {
  if (a.rows() < 2 || b.rows() < 2 || a.cols() != b.cols())
    throw Error(Errc::kShapeMismatch, "energy distance needs two point sets of equal dimension");
  return 2.0 * mean_pairwise(a, b, false) - mean_pairwise(a, a, true) - mean_pairwise(b, b, true);
}

}  // namespace svcdiff
