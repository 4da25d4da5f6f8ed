// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "svcdiff/sampler.hpp"
#include "svcdiff/schedule.hpp"
#include "svcdiff/types.hpp"

namespace svcdiff {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;
};

// h <- h + contract(silu(expand(h))). Removing a block leaves an identity
// bypass, which is what network slimming relies on.
struct ResidualBlock {
  DenseLayer expand;
  DenseLayer contract;
};

// Single-head cross-attention from the hidden stream (queries) to the
// conditioning track (keys/values) within one sample.
struct CrossAttention {
  Eigen::MatrixXd query;   // H x H
  Eigen::MatrixXd key;     // H x cond_dim
  Eigen::MatrixXd value;   // H x cond_dim
  Eigen::MatrixXd output;  // H x H
};

struct DenoiserArch {
  int data_dim = 80;
  std::vector<int> widths{128, 128};  // widths[0]: hidden width; rest: block inner widths
  int time_embed = 16;
  int cond_dim = kConditioningDim;
  bool attention = false;
};

// Per-frame conditional x-prediction network:
//   h = silu(W_in [y, emb(tau)] + b_in + P c)      (denoising path + conditioning path)
//   h += attention(h, c)                           (optional)
//   h += block_k(h) for each residual block
//   x_hat = W_out h + b_out
// Weights are kept in 64-bit; checkpoints store them as 32-bit floats.
struct DenoiserParams {
  int data_dim = 0;
  int time_embed = 0;
  int cond_dim = kConditioningDim;
  DenseLayer input;
  Eigen::MatrixXd cond_proj;  // H x cond_dim
  std::optional<CrossAttention> attention;
  std::vector<ResidualBlock> blocks;
  DenseLayer output;

  int hidden() const { return static_cast<int>(input.weight.rows()); }
  DenoiserArch arch() const;
  std::size_t parameter_count() const;

  // Every parameter tensor in a fixed order (input, cond_proj, attention,
  // blocks, output).
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
};

DenoiserParams init_denoiser(const DenoiserArch& arch, std::uint64_t seed);
DenoiserParams zeros_like(const DenoiserParams& p);

// Zero weights with the output bias set to x0: predicts x0 for every input.
DenoiserParams point_mass_denoiser(const DenoiserArch& arch, const Eigen::VectorXd& x0);

Eigen::VectorXd flatten(const DenoiserParams& p);
void unflatten(const Eigen::VectorXd& flat, DenoiserParams& p);

// Sinusoidal embedding of tau, width `width` (even).
Eigen::RowVectorXd time_embedding(double tau, int width);

// Frames from one or more samples stacked row-wise. Rows of different
// samples may carry different times; attention never crosses segments.
struct FrameBatch {
  Tensor inputs;                            // rows x data_dim
  Eigen::VectorXd taus;                     // per row
  Tensor cond;                              // rows x cond_dim, or empty
  std::vector<Eigen::Index> segment_starts;  // ascending, first is 0
};


Tensor forward(const DenoiserParams& p, const FrameBatch& batch);

Tensor predict_x(const DenoiserParams& p, const LatentState& y, const ConditioningTrack* cond);

class MlpDenoiser final : public Denoiser {
 public:
  explicit MlpDenoiser(DenoiserParams params) : params_(std::move(params)) {}
  Tensor predict_x(const LatentState& y, const ConditioningTrack* cond) const override;
  const DenoiserParams& params() const noexcept { return params_; }

 private:
  DenoiserParams params_;
};

// One weighted regression term: weight * ||x_hat(input) - target||^2.
struct RegressionTerm {
  LatentState input;
  const ConditioningTrack* cond = nullptr;
  Tensor target;
  double weight = 1.0;
};

// Sum of weighted squared errors; accumulates the exact gradient into *grad
// (which must be shaped like p) when non-null.
double regression_loss(const DenoiserParams& p, std::span<const RegressionTerm> terms, DenoiserParams* grad);

enum class LossWeight { kUnit, kSnr };
LossWeight parse_loss_weight(std::string_view name);
std::string_view to_string(LossWeight w) noexcept;

struct LossConfig {
  LossWeight weight = LossWeight::kUnit;
  int batch = 8;
  double lr = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
};

struct Example {
  DataSample x;
  std::optional<ConditioningTrack> cond;
};

// Diffusion times and noise tensors for one batch, replayable from (seed, stream).
struct DiffusionDraws {
  std::vector<double> taus;
  std::vector<Tensor> noise;
};

DiffusionDraws draw_diffusion(std::span<const Example> batch, std::uint64_t seed, std::uint64_t stream);

double loss_weight(const NoiseSchedule& s, LossWeight w, double tau);

// Mean over the batch of v(theta_tau) * ||x_hat(y_tau) - x||^2.
double loss(const DenoiserParams& p, std::span<const Example> batch, const NoiseSchedule& s,
            const LossConfig& cfg, const DiffusionDraws& draws);
DenoiserParams grad(const DenoiserParams& p, std::span<const Example> batch, const NoiseSchedule& s,
                    const LossConfig& cfg, const DiffusionDraws& draws);
double loss_and_grad(const DenoiserParams& p, std::span<const Example> batch, const NoiseSchedule& s,
                     const LossConfig& cfg, const DiffusionDraws& draws, DenoiserParams& grad_out);

class Adam {
 public:
  Adam(const DenoiserParams& like, double lr, double beta1, double beta2, double eps);
  explicit Adam(const DenoiserParams& like, const LossConfig& cfg)
      : Adam(like, cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps) {}
  void step(DenoiserParams& p, const DenoiserParams& g);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  DenoiserParams m_, v_;
};

struct TrainConfig {
  LossConfig loss;
  std::uint64_t seed = 0;
  int crop_frames = 0;  // 0 keeps whole examples
};

struct TrainResult {
  DenoiserParams params;
  std::vector<double> losses;
};

// Random crop of `frames` consecutive frames (x and cond together).
Example crop_example(const Example& ex, int frames, std::uint64_t offset_draw);

TrainResult train(DenoiserParams p, std::span<const Example> dataset, const NoiseSchedule& s,
                  const TrainConfig& cfg, int steps);

std::vector<std::uint8_t> serialize(const DenoiserParams& p);
DenoiserParams deserialize(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const DenoiserParams& p);
DenoiserParams load_checkpoint(const std::filesystem::path& path);

}  // namespace svcdiff
