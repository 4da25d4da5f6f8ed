// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/schedule.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "svcdiff/error.hpp"

namespace svcdiff {
namespace {

void check_time(double tau) {
  if (!(tau >= 0.0 && tau <= 1.0))
    throw Error(Errc::kOutOfRangeTime, "tau=" + std::to_string(tau) + " outside [0, 1]");
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "vp-cosine") return ScheduleKind::kVpCosine;
  if (name == "vp-linear-logsnr") return ScheduleKind::kVpLinearLogSnr;
  throw Error(Errc::kInvalidScheduleParams, "unknown schedule kind '" + std::string(name) + "'");
}

std::string_view to_string(ScheduleKind kind) noexcept {
  return kind == ScheduleKind::kVpCosine ? "vp-cosine" : "vp-linear-logsnr";
}

NoiseSchedule make_schedule(ScheduleKind kind, std::span<const double> params) {
  if (kind == ScheduleKind::kVpCosine) {
    if (!params.empty())
      throw Error(Errc::kInvalidScheduleParams, "vp-cosine takes no parameters");
    return NoiseSchedule(kind, {});
  }
  std::vector<double> p(params.begin(), params.end());
  if (p.empty()) p = {-10.0, 10.0};
  if (p.size() != 2)
    throw Error(Errc::kInvalidScheduleParams, "vp-linear-logsnr needs [theta_min, theta_max]");
  if (!std::isfinite(p[0]) || !std::isfinite(p[1]))
    throw Error(Errc::kInvalidScheduleParams, "non-finite log-SNR endpoint");
  if (!(p[1] > p[0]))
    throw Error(Errc::kInvalidScheduleParams, "theta_max must exceed theta_min");
  return NoiseSchedule(kind, std::move(p));
}

Coeffs NoiseSchedule::coeffs(double tau) const {
  check_time(tau);
  if (kind_ == ScheduleKind::kVpCosine) {
    const double angle = 0.5 * std::numbers::pi * tau;
    return {std::cos(angle), std::sin(angle)};
  }
  const double theta = params_[1] + (params_[0] - params_[1]) * tau;
  return {std::sqrt(sigmoid(theta)), std::sqrt(sigmoid(-theta))};
}

double NoiseSchedule::log_snr(double tau) const {
  check_time(tau);
  if (kind_ == ScheduleKind::kVpLinearLogSnr) return params_[1] + (params_[0] - params_[1]) * tau;
  const Coeffs c = coeffs(tau);
  if (c.noise == 0.0) throw Error(Errc::kDivergentSnr, "gamma is zero at tau=0");
  return 2.0 * (std::log(c.signal) - std::log(c.noise));
}

double NoiseSchedule::transition_var(double rho, double tau) const {
  check_time(rho);
  check_time(tau);
  if (rho > tau)
    throw Error(Errc::kTimeOrderViolation,
                "transition from rho=" + std::to_string(rho) + " to earlier tau=" + std::to_string(tau));
  if (rho == tau) return 0.0;
  const double gamma_tau = coeffs(tau).noise;
  if (coeffs(rho).noise == 0.0) return gamma_tau * gamma_tau;  // theta_rho = +inf
  const double ratio_minus_one = std::expm1(log_snr(tau) - log_snr(rho));
  return std::max(0.0, -ratio_minus_one) * gamma_tau * gamma_tau;
}

}  // namespace svcdiff
