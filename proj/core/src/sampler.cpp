// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/sampler.hpp"

#include <cmath>
#include <string>

#include "svcdiff/error.hpp"
#include "svcdiff/rng.hpp"

namespace svcdiff {
namespace {

void check_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::kShapeMismatch, std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                                          std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                                          std::to_string(b.cols()));
}

void check_order(double rho, double tau) {
  if (rho > tau)
    throw Error(Errc::kTimeOrderViolation, "rho=" + std::to_string(rho) + " after tau=" + std::to_string(tau));
}

void check_strict_order(double rho, double tau) {
  if (!(rho < tau))
    throw Error(Errc::kTimeOrderViolation,
                "step target rho=" + std::to_string(rho) + " not before tau=" + std::to_string(tau));
}

// exp(theta_tau - theta_rho), taking theta_rho = +inf when gamma_rho = 0.
double snr_ratio(const NoiseSchedule& s, double rho, double tau) {
  if (rho == tau) return 1.0;
  if (s.coeffs(rho).noise == 0.0) return 0.0;
  return std::exp(s.log_snr(tau) - s.log_snr(rho));
}

}  // namespace

SamplerMode parse_sampler_mode(std::string_view name) {
  if (name == "ancestral") return SamplerMode::kAncestral;
  if (name == "ddim") return SamplerMode::kDdim;
  throw Error(Errc::kInvalidArgument, "unknown sampler mode '" + std::string(name) + "'");
}

TimeGrid parse_time_grid(std::string_view name) {
  if (name == "uniform") return TimeGrid::kUniform;
  if (name == "quadratic") return TimeGrid::kQuadratic;
  throw Error(Errc::kInvalidArgument, "unknown time grid '" + std::string(name) + "'");
}

std::string_view to_string(SamplerMode mode) noexcept {
  return mode == SamplerMode::kDdim ? "ddim" : "ancestral";
}

std::string_view to_string(TimeGrid grid) noexcept {
  return grid == TimeGrid::kUniform ? "uniform" : "quadratic";
}

void SamplerConfig::validate() const {
  if (steps < 1) throw Error(Errc::kInvalidArgument, "sampler steps must be >= 1");
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw Error(Errc::kInvalidArgument, "kappa must lie in [0, 1]");
}

std::vector<double> make_time_grid(TimeGrid grid, int steps) {
  if (steps < 1) throw Error(Errc::kInvalidArgument, "time grid needs >= 1 step");
  std::vector<double> taus(static_cast<std::size_t>(steps) + 1);
  const double span = kTauMax - kTauMin;
  for (int i = 0; i <= steps; ++i) {
    const double remaining = 1.0 - static_cast<double>(i) / steps;
    const double shaped = grid == TimeGrid::kUniform ? remaining : remaining * remaining;
    taus[static_cast<std::size_t>(i)] = kTauMin + span * shaped;
  }
  taus.front() = kTauMax;
  taus.back() = kTauMin;
  return taus;
}

LatentState forward_marginal(const NoiseSchedule& s, const DataSample& x, double tau, const Tensor& noise) {
  check_shape(x.values, noise, "forward_marginal");
  const Coeffs c = s.coeffs(tau);
  return {c.signal * x.values + c.noise * noise, tau};
}

LatentState forward_transition(const NoiseSchedule& s, const LatentState& y_rho, double tau,
                               const Tensor& noise) {
  check_shape(y_rho.values, noise, "forward_transition");
  check_order(y_rho.tau, tau);
  if (tau == y_rho.tau) return y_rho;
  const double scale = s.coeffs(tau).signal / s.coeffs(y_rho.tau).signal;
  const double std_dev = std::sqrt(s.transition_var(y_rho.tau, tau));
  return {scale * y_rho.values + std_dev * noise, tau};
}

Posterior posterior_mean_var(const NoiseSchedule& s, const LatentState& y_tau, const DataSample& x_hat,
                             double rho) {
  check_shape(y_tau.values, x_hat.values, "posterior_mean_var");
  check_order(rho, y_tau.tau);
  const double r = snr_ratio(s, rho, y_tau.tau);
  const Coeffs at_rho = s.coeffs(rho);
  const Coeffs at_tau = s.coeffs(y_tau.tau);
  Posterior post;
  if (r == 1.0) {
    post.mean = y_tau.values;
    post.var = 0.0;
    return post;
  }
  const double one_minus_r = 1.0 - r;
  post.mean = (r * at_rho.signal / at_tau.signal) * y_tau.values + (one_minus_r * at_rho.signal) * x_hat.values;
  post.var = one_minus_r * (at_rho.noise * at_rho.noise);
  return post;
}

double ancestral_noise_scale(const NoiseSchedule& s, double rho, double tau, double kappa) {
  check_order(rho, tau);
  const double one_minus_r = 1.0 - snr_ratio(s, rho, tau);
  const double g_rho = s.coeffs(rho).noise;
  const double g_tau = s.coeffs(tau).noise;
  const double var = one_minus_r * (std::pow(g_rho * g_rho, 1.0 - kappa) * std::pow(g_tau * g_tau, kappa));
  return std::sqrt(std::max(var, 0.0));
}

LatentState ancestral_update(const NoiseSchedule& s, const LatentState& y_tau, const DataSample& x_hat,
                             double rho, double kappa, const Tensor& noise) {
  check_strict_order(rho, y_tau.tau);
  check_shape(y_tau.values, noise, "ancestral_step noise");
  Posterior post = posterior_mean_var(s, y_tau, x_hat, rho);
  const double scale = ancestral_noise_scale(s, rho, y_tau.tau, kappa);
  post.mean += scale * noise;
  return {std::move(post.mean), rho};
}

LatentState ddim_update(const NoiseSchedule& s, const LatentState& y_tau, const DataSample& x_hat, double rho) {
  check_strict_order(rho, y_tau.tau);
  check_shape(y_tau.values, x_hat.values, "ddim_step");
  const Coeffs at_rho = s.coeffs(rho);
  const Coeffs at_tau = s.coeffs(y_tau.tau);
  const double noise_ratio = at_rho.noise / at_tau.noise;
  Tensor next = (at_rho.signal - noise_ratio * at_tau.signal) * x_hat.values + noise_ratio * y_tau.values;
  return {std::move(next), rho};
}

LatentState ancestral_step(const NoiseSchedule& s, const Denoiser& denoiser, const LatentState& y_tau,
                           double rho, double kappa, const Tensor& noise, const ConditioningTrack* cond) {
  check_strict_order(rho, y_tau.tau);
  return ancestral_update(s, y_tau, DataSample{denoiser.predict_x(y_tau, cond)}, rho, kappa, noise);
}

LatentState ddim_step(const NoiseSchedule& s, const Denoiser& denoiser, const LatentState& y_tau, double rho,
                      const ConditioningTrack* cond) {
  check_strict_order(rho, y_tau.tau);
  return ddim_update(s, y_tau, DataSample{denoiser.predict_x(y_tau, cond)}, rho);
}

DataSample sample(const NoiseSchedule& s, const Denoiser& denoiser, const SamplerConfig& cfg,
                  const ConditioningTrack* cond, Eigen::Index rows, Eigen::Index cols, SamplerStats* stats) {
  cfg.validate();
  const std::vector<double> grid = make_time_grid(cfg.time_grid, cfg.steps);
  CounterRng start_rng(cfg.seed, 0);
  LatentState y{start_rng.normal_tensor(rows, cols), grid.front()};
  SamplerStats local;
  for (int i = 0; i < cfg.steps; ++i) {
    const double rho = grid[static_cast<std::size_t>(i) + 1];
    DataSample x_hat{denoiser.predict_x(y, cond)};
    ++local.evaluations;
    if (cfg.mode == SamplerMode::kDdim) {
      y = ddim_update(s, y, x_hat, rho);
    } else {
      CounterRng step_rng(cfg.seed, static_cast<std::uint64_t>(i) + 1);
      y = ancestral_update(s, y, x_hat, rho, cfg.kappa, step_rng.normal_tensor(rows, cols));
    }
    ++local.steps;
  }
  DataSample out{denoiser.predict_x(y, cond)};
  ++local.evaluations;
  if (stats) *stats = local;
  return out;
}

}  // namespace svcdiff
