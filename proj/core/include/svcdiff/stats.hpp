// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "svcdiff/types.hpp"

namespace svcdiff {

// Linear-interpolated quantile, q in [0, 1]. Input need not be sorted.
double quantile(std::span<const double> values, double q);
inline double median(std::span<const double> values) { return quantile(values, 0.5); }
inline double iqr(std::span<const double> values) { return quantile(values, 0.75) - quantile(values, 0.25); }
double mean(std::span<const double> values);
double stddev(std::span<const double> values);

// Energy distance between two point clouds (rows are points), using the
// U-statistic for the within-set terms.
double energy_distance(const Tensor& a, const Tensor& b);

}  // namespace svcdiff
