// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace svcdiff {

enum class ScheduleKind { kVpCosine, kVpLinearLogSnr };

ScheduleKind parse_schedule_kind(std::string_view name);
std::string_view to_string(ScheduleKind kind) noexcept;

// Signal/noise coefficients at one diffusion time.
struct Coeffs {
  double signal;  // beta
  double noise;   // gamma
};

// Variance-preserving noise schedule over tau in [0, 1].
//
// vp-cosine:         beta = cos(pi tau / 2), gamma = sin(pi tau / 2).
// vp-linear-logsnr:  log-SNR falls linearly from theta_max at tau = 0 to
//                    theta_min at tau = 1; beta^2 = sigmoid(theta).
//
// Values are immutable and safe to share between threads.
class NoiseSchedule {
 public:
  ScheduleKind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return params_; }

  Coeffs coeffs(double tau) const;
  double log_snr(double tau) const;
  // Forward transition variance gamma^2_{tau|rho} for rho <= tau.
  double transition_var(double rho, double tau) const;

  friend NoiseSchedule make_schedule(ScheduleKind kind, std::span<const double> params);

 private:
  NoiseSchedule(ScheduleKind kind, std::vector<double> params) : kind_(kind), params_(std::move(params)) {}

  ScheduleKind kind_;
  std::vector<double> params_;
};

// params: empty for vp-cosine; {theta_min, theta_max} for vp-linear-logsnr
// (defaults to {-10, 10} when empty).
NoiseSchedule make_schedule(ScheduleKind kind, std::span<const double> params = {});

// Samplers never evaluate the endpoints, where the log-SNR diverges.
inline constexpr double kTauMin = 1e-5;
inline constexpr double kTauMax = 1.0 - 1e-5;

}  // namespace svcdiff
