// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "svcdiff/schedule.hpp"
#include "svcdiff/types.hpp"

namespace svcdiff {

// x-prediction network interface: estimates clean data from a noisy latent.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual Tensor predict_x(const LatentState& y, const ConditioningTrack* cond) const = 0;
};

enum class SamplerMode { kAncestral, kDdim };
enum class TimeGrid { kUniform, kQuadratic };

SamplerMode parse_sampler_mode(std::string_view name);
TimeGrid parse_time_grid(std::string_view name);
std::string_view to_string(SamplerMode mode) noexcept;
std::string_view to_string(TimeGrid grid) noexcept;

struct SamplerConfig {
  SamplerMode mode = SamplerMode::kDdim;
  int steps = 64;
  double kappa = 0.0;
  std::uint64_t seed = 0;
  TimeGrid time_grid = TimeGrid::kUniform;

  void validate() const;
};

// Descending times from kTauMax to kTauMin, steps + 1 entries.
std::vector<double> make_time_grid(TimeGrid grid, int steps);

// y_tau = beta_tau x + gamma_tau noise.
LatentState forward_marginal(const NoiseSchedule& s, const DataSample& x, double tau, const Tensor& noise);

// y_tau = (beta_tau / beta_rho) y_rho + gamma_{tau|rho} noise.
LatentState forward_transition(const NoiseSchedule& s, const LatentState& y_rho, double tau,
                               const Tensor& noise);

struct Posterior {
  Tensor mean;
  double var = 0.0;
};

// Gaussian posterior q(y_rho | y_tau, x_hat) for rho <= tau.
Posterior posterior_mean_var(const NoiseSchedule& s, const LatentState& y_tau, const DataSample& x_hat,
                             double rho);

// Std of the kappa-interpolated ancestral noise:
// sqrt((gamma^2_{rho|tau})^(1-kappa) (gamma^2_{tau|rho})^kappa).
double ancestral_noise_scale(const NoiseSchedule& s, double rho, double tau, double kappa);

// Step updates given an already-computed prediction.
LatentState ancestral_update(const NoiseSchedule& s, const LatentState& y_tau, const DataSample& x_hat,
                             double rho, double kappa, const Tensor& noise);
LatentState ddim_update(const NoiseSchedule& s, const LatentState& y_tau, const DataSample& x_hat, double rho);

LatentState ancestral_step(const NoiseSchedule& s, const Denoiser& denoiser, const LatentState& y_tau,
                           double rho, double kappa, const Tensor& noise,
                           const ConditioningTrack* cond = nullptr);
LatentState ddim_step(const NoiseSchedule& s, const Denoiser& denoiser, const LatentState& y_tau, double rho,
                      const ConditioningTrack* cond = nullptr);

struct SamplerStats {
  int steps = 0;        // latent transitions taken
  int evaluations = 0;  // denoiser calls
};

// Starts from standard normal noise at kTauMax, takes cfg.steps transitions
// down the time grid and returns the prediction made at the terminal latent.
// Noise is drawn from CounterRng(cfg.seed, 0) for the start and
// CounterRng(cfg.seed, i + 1) for ancestral step i.
DataSample sample(const NoiseSchedule& s, const Denoiser& denoiser, const SamplerConfig& cfg,
                  const ConditioningTrack* cond, Eigen::Index rows, Eigen::Index cols,
                  SamplerStats* stats = nullptr);

}  // namespace svcdiff
