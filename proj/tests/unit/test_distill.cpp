// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "svcdiff/distill.hpp"
#include "svcdiff/error.hpp"
#include "svcdiff/rng.hpp"
#include "test_support.hpp"

namespace svcdiff {
namespace {

using testing::GaussianDenoiser;
using testing::PointMassDenoiser;

const NoiseSchedule kCos = make_schedule(ScheduleKind::kVpCosine);

TEST(DistillConfig, Validation) {
  DistillConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.lr, 5e-5);
  c.start_steps = 48;
  EXPECT_ERRC(c.validate(), Errc::kInvalidArgument);
  c.start_steps = 4;
  c.halvings = 3;
  EXPECT_ERRC(c.validate(), Errc::kInvalidArgument);
  c.start_steps = 8;
  EXPECT_NO_THROW(c.validate());
}

TEST(DistillTarget, PointMassTeacherGivesX0) {
  Eigen::RowVectorXd x0(3);
  x0 << 0.25, -1.5, 2.0;
  const PointMassDenoiser d(x0);
  CounterRng rng(1);
  const Coeffs c = kCos.coeffs(0.9);
  const LatentState y{c.signal * x0.replicate(6, 1) + c.noise * rng.normal_tensor(6, 3), 0.9};
  const DataSample t = distill_target(d, kCos, y, 0.6, 0.3);
  EXPECT_LT((t.values - x0.replicate(6, 1)).cwiseAbs().maxCoeff(), 1e-12);
}

// One-step DDIM from tau to rho_end as a function of the prediction x,
// inverted by bisection (it is affine and increasing in x).
double invert_by_bisection(double y, double tau, double rho_end, double y_end) {
  const Coeffs ct = kCos.coeffs(tau), ce = kCos.coeffs(rho_end);
  auto f = [&](double x) { return ce.signal * x + ce.noise * (y - ct.signal * x) / ct.noise - y_end; };
  double lo = -100.0, hi = 100.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

TEST(DistillTarget, MatchesNumericInversionForGaussianTeacher) {
  const GaussianDenoiser d(kCos, 0.7, 0.4);
  CounterRng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const double tau = 0.3 + 0.65 * rng.uniform();
    const double rho_end = tau * (0.1 + 0.5 * rng.uniform());
    const double rho_mid = 0.5 * (tau + rho_end);
    const LatentState y{Tensor::Constant(1, 1, 2.0 * rng.normal()), tau};
    const LatentState mid = ddim_step(kCos, d, y, rho_mid);
    const LatentState end = ddim_step(kCos, d, mid, rho_end);
    const double want = invert_by_bisection(y.values(0, 0), tau, rho_end, end.values(0, 0));
    EXPECT_NEAR(distill_target(d, kCos, y, rho_mid, rho_end).values(0, 0), want, 1e-9);
  }
}

TEST(DistillTarget, OneStudentStepReproducesTwoTeacherSteps) {
  const GaussianDenoiser d(kCos, -0.2, 1.3);
  CounterRng rng(3);
  const auto grid = make_time_grid(TimeGrid::kUniform, 16);
  for (std::size_t i = 0; i + 2 < grid.size(); i += 2) {
    const LatentState y{rng.normal_tensor(4, 2), grid[i]};
    const DataSample target = distill_target(d, kCos, y, grid[i + 1], grid[i + 2]);
    const LatentState student = ddim_update(kCos, y, target, grid[i + 2]);
    const LatentState teacher = ddim_step(kCos, d, ddim_step(kCos, d, y, grid[i + 1]), grid[i + 2]);
    EXPECT_LT((student.values - teacher.values).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(DistillTarget, Guards) {
  const PointMassDenoiser d(Eigen::RowVectorXd::Zero(1));
  const LatentState y{Tensor::Constant(1, 1, 0.3), 0.5};
  EXPECT_ERRC(distill_target(d, kCos, y, 0.5 - 5e-13, 0.5 - 1e-12), Errc::kDegenerateStep);
  EXPECT_ERRC(distill_target(d, kCos, y, 0.2, 0.3), Errc::kTimeOrderViolation);
  EXPECT_ERRC(distill_target(d, kCos, y, 0.6, 0.3), Errc::kTimeOrderViolation);
}

DenoiserArch toy_arch(int dim) {
  DenoiserArch a;
  a.data_dim = dim;
  a.widths = {16, 16};
  a.time_embed = 8;
  a.cond_dim = 2;
  return a;
}

TEST(DistillStage, ZeroIterationsReturnInit) {
  const DenoiserParams teacher = init_denoiser(toy_arch(2), 1);
  const DenoiserParams init = init_denoiser(toy_arch(2), 2);
  DistillConfig cfg;
  cfg.steps_per_stage = 0;
  const StageResult r = distill_stage(teacher, 8, init, {}, kCos, cfg);
  EXPECT_EQ(flatten(r.student), flatten(init));
  EXPECT_EQ(r.student_steps, 4);
  EXPECT_TRUE(r.losses.empty());
}

TEST(DistillStage, PointMassTeacherStudentConverges) {
  Eigen::VectorXd x0(2);
  x0 << 0.6, -0.9;
  const DenoiserParams teacher = point_mass_denoiser(toy_arch(2), x0);
  std::vector<Example> data(1);
  data[0].x.values = x0.transpose().replicate(16, 1);
  DistillConfig cfg;
  cfg.steps_per_stage = 1500;
  cfg.lr = 2e-3;
  cfg.batch = 4;
  cfg.seed = 3;
  const StageResult r = distill_stage(teacher, 2, init_denoiser(toy_arch(2), 3), data, kCos, cfg);
  ASSERT_EQ(r.losses.size(), 1500u);
  double tail = 0.0;
  for (std::size_t i = r.losses.size() - 50; i < r.losses.size(); ++i) tail += r.losses[i] / 50.0;
  EXPECT_LT(tail, 1e-3 * r.losses.front());
  SamplerConfig sc;
  sc.steps = 1;
  sc.seed = 11;
  const MlpDenoiser student(r.student);
  const Tensor out = sample(kCos, student, sc, nullptr, 64, 2).values;
  EXPECT_LT((out.rowwise() - x0.transpose()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(DistillStage, RejectsOddTeacherSteps) {
  const DenoiserParams t = init_denoiser(toy_arch(2), 1);
  std::vector<Example> data(1);
  data[0].x.values = Tensor::Zero(4, 2);
  EXPECT_ERRC(distill_stage(t, 7, t, data, kCos, {}), Errc::kInvalidArgument);
}

TEST(ProgressiveDistill, StageLedger) {
  const DenoiserParams teacher = init_denoiser(toy_arch(2), 4);
  std::vector<Example> data(2);
  CounterRng rng(4);
  for (auto& e : data) e.x.values = rng.normal_tensor(8, 2);
  DistillConfig cfg;
  cfg.steps_per_stage = 3;
  cfg.batch = 2;
  cfg.halvings = 0;
  EXPECT_TRUE(progressive_distill(teacher, data, kCos, cfg).empty());

  cfg.halvings = 3;
  std::vector<StageReport> reports;
  std::vector<int> seen_steps;
  const auto quality = [&](const DenoiserParams& p, int steps) {
    SamplerConfig sc;
    sc.steps = steps;
    SamplerStats st;
    (void)sample(kCos, MlpDenoiser(p), sc, nullptr, 4, 2, &st);
    seen_steps.push_back(st.steps);
    return 0.0;
  };
  const auto stages = progressive_distill(teacher, data, kCos, cfg, quality, &reports);
  ASSERT_EQ(stages.size(), 3u);
  const int want[3] = {32, 16, 8};
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(stages[k].teacher_steps, 2 * want[k]);
    EXPECT_EQ(stages[k].student_steps, want[k]);
    EXPECT_EQ(reports[k].stage, k + 1);
    EXPECT_EQ(seen_steps[k], want[k]);
    const auto j = nlohmann::json::parse(reports[k].to_json());
    EXPECT_EQ(j["student_steps"], want[k]);
    EXPECT_TRUE(j.contains("final_loss"));
  }
}

// ---- slimming ----

constexpr int kHidden = 96;
constexpr int kInner = 192;

EvalSet slimming_eval(const Eigen::VectorXd& target) {
  std::vector<Example> examples(4);
  for (auto& e : examples) e.x.values = target.transpose().replicate(8, 1);
  CounterRng rng(9);
  EvalSet eval{examples, kCos, {}, 9, {rng.normal_tensor(384, target.size()), 0.5}, std::nullopt, 1};
  return eval;
}

TEST(Slim, RemoveAndDuplicateEditBlocks) {
  const Eigen::VectorXd target = Eigen::VectorXd::Constant(4, 0.5);
  const DenoiserParams net = testing::slimming_network(4, 16, 8, 3, 1, target, 1);
  const DenoiserParams less = remove_module(net, 1);
  ASSERT_EQ(less.blocks.size(), 2u);
  EXPECT_EQ(less.blocks[1].contract.bias, net.blocks[2].contract.bias);
  const DenoiserParams more = duplicate_module(net, 0);
  ASSERT_EQ(more.blocks.size(), 4u);
  EXPECT_EQ(more.blocks[1].contract.bias, net.blocks[0].contract.bias);
  EXPECT_EQ(more.blocks[2].contract.bias, net.blocks[1].contract.bias);
  EXPECT_ERRC(remove_module(net, 3), Errc::kNonRemovableModule);
  EXPECT_ERRC(duplicate_module(net, -1), Errc::kNonRemovableModule);
}

TEST(Slim, IdentityModuleHasZeroScoreDeltaAndLowestRatio) {
  Eigen::VectorXd target(4);
  target << 0.3, -0.2, 0.8, 0.1;
  const DenoiserParams net = testing::slimming_network(4, kHidden, kInner, 3, 2, target, 2);
  const EvalSet eval = slimming_eval(target);
  EXPECT_NEAR(validation_loss(net, eval), 0.0, 1e-20);
  std::vector<ModuleContribution> c;
  for (int m = 0; m < 3; ++m) {
    // Timing on a shared machine can be noisy; retry like slim_network does.
    for (int attempt = 0;; ++attempt) {
      try {
        c.push_back(module_contribution(net, m, eval, 10 << attempt));
        break;
      } catch (const Error& e) {
        if (e.code() != Errc::kUnstableLatency || attempt >= 3) throw;
      }
    }
  }
  EXPECT_EQ(c[2].score_delta, 0.0);
  EXPECT_GT(c[0].score_delta, 0.0);
  EXPECT_GT(c[1].score_delta, 0.0);
  for (const auto& x : c) EXPECT_GT(x.latency_delta, 0.0);
  EXPECT_LT(c[2].ratio, c[0].ratio);
  EXPECT_LT(c[2].ratio, c[1].ratio);
  EXPECT_ERRC(module_contribution(net, 0, eval, 9), Errc::kInvalidArgument);
  EXPECT_ERRC(module_contribution(net, 5, eval, 10), Errc::kNonRemovableModule);
}

TEST(Slim, LatencyGuard) {
  const std::vector<double> full{1.0, 1.1, 0.9, 1.0, 1.05, 0.95, 1.0, 1.0, 1.02, 0.98};
  // Removal saves nothing.
  EXPECT_ERRC(contribution_from_timings(0, 1.0, full, full), Errc::kUnstableLatency);
  // Removal "saves" negative time.
  std::vector<double> slower = full;
  for (auto& v : slower) v += 0.1;
  EXPECT_ERRC(contribution_from_timings(0, 1.0, full, slower), Errc::kUnstableLatency);
  // Saves 0.2 s on average but the paired differences swing by +-0.5 s.
  std::vector<double> noisy(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) noisy[i] = full[i] - 0.2 + (i % 2 ? 0.5 : -0.5);
  EXPECT_ERRC(contribution_from_timings(0, 1.0, full, noisy), Errc::kUnstableLatency);
  // Clean 0.25 s saving.
  std::vector<double> faster = full;
  for (auto& v : faster) v -= 0.25;
  const ModuleContribution c = contribution_from_timings(3, 0.5, full, faster);
  EXPECT_EQ(c.module_id, 3);
  EXPECT_NEAR(c.latency_delta, 0.25, 1e-12);
  EXPECT_NEAR(c.latency_spread, 0.0, 1e-12);
  EXPECT_NEAR(c.ratio, 2.0, 1e-9);
  EXPECT_ERRC(contribution_from_timings(0, 1.0, full, std::vector<double>{1.0}), Errc::kInvalidArgument);
}

TEST(Slim, RemovesIdentityFirstAndLatencyDrops) {
  Eigen::VectorXd target(4);
  target << 0.3, -0.2, 0.8, 0.1;
  const DenoiserParams net = testing::slimming_network(4, kHidden, kInner, 4, 1, target, 3);
  const EvalSet eval = slimming_eval(target);
  const double full = measure_latency(net, eval, 15).median;
  // Aim between the 3- and 2-block latencies so two removals are needed.
  const SlimResult r = slim_network(net, full * 0.62, eval, 10);
  ASSERT_GE(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].action, "remove");
  EXPECT_EQ(r.log[0].module_id, 1);
  EXPECT_EQ(r.log[0].score_delta, 0.0);
  for (const auto& a : r.log) {
    EXPECT_EQ(a.action, "remove");
    EXPECT_LT(a.latency_after, a.latency_before);
    const auto j = nlohmann::json::parse(a.to_json());
    for (const char* key : {"module_id", "action", "score_delta", "latency_delta", "timestamp"})
      EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(r.net.blocks.size(), 4u - r.log.size());
}

TEST(Slim, UnderTargetDuplicatesOnce) {
  Eigen::VectorXd target(4);
  target << 0.3, -0.2, 0.8, 0.1;
  const DenoiserParams net = testing::slimming_network(4, kHidden, kInner, 3, 0, target, 4);
  const EvalSet eval = slimming_eval(target);
  const SlimResult r = slim_network(net, 1e3, eval, 10);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_EQ(r.log[0].action, "duplicate");
  EXPECT_NE(r.log[0].module_id, 0);  // the identity block contributes nothing
  EXPECT_EQ(r.net.blocks.size(), 4u);
}

TEST(Slim, ImpossibleTargetUnreachable) {
  Eigen::VectorXd target(4);
  target << 0.3, -0.2, 0.8, 0.1;
  const DenoiserParams net = testing::slimming_network(4, kHidden, kInner, 2, 0, target, 5);
  const EvalSet eval = slimming_eval(target);
  EXPECT_ERRC(slim_network(net, 1e-12, eval, 10), Errc::kTargetUnreachable);
  EXPECT_ERRC(slim_network(net, 0.0, eval, 10), Errc::kInvalidArgument);
}

}  // namespace
}  // namespace svcdiff
