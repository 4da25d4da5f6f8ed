// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "svcdiff/error.hpp"
#include "svcdiff/rng.hpp"
#include "svcdiff/stats.hpp"

namespace svcdiff {

void DistillConfig::validate() const {
  if (halvings < 0) throw Error(Errc::kInvalidArgument, "halvings must be >= 0");
  if (start_steps < 1 || (start_steps & (start_steps - 1)) != 0)
    throw Error(Errc::kInvalidArgument, "start_steps must be a power of two");
  if (halvings > 0 && start_steps < (1 << halvings))
    throw Error(Errc::kInvalidArgument, "start_steps must be >= 2^halvings");
  if (steps_per_stage < 0) throw Error(Errc::kInvalidArgument, "steps_per_stage must be >= 0");
  if (batch < 1) throw Error(Errc::kInvalidArgument, "batch must be >= 1");
  if (!(lr >= 0.0)) throw Error(Errc::kInvalidArgument, "lr must be >= 0");
}

DataSample distill_target(const Denoiser& teacher, const NoiseSchedule& s, const LatentState& y_tau,
                          double rho_mid, double rho_end, const ConditioningTrack* cond) {
  if (!(rho_end < rho_mid && rho_mid < y_tau.tau))
    throw Error(Errc::kTimeOrderViolation, "distillation needs rho_end < rho_mid < tau");
  const LatentState mid = ddim_step(s, teacher, y_tau, rho_mid, cond);
  const LatentState end = ddim_step(s, teacher, mid, rho_end, cond);
  const Coeffs at_tau = s.coeffs(y_tau.tau);
  const Coeffs at_end = s.coeffs(rho_end);
  const double noise_ratio = at_end.noise / at_tau.noise;
  const double denom = at_end.signal - noise_ratio * at_tau.signal;
  if (std::abs(denom) < 1e-8)
    throw Error(Errc::kDegenerateStep, "signal-to-noise ratios at tau and rho_end coincide");
  return {(end.values - noise_ratio * y_tau.values) / denom};
}

StageResult distill_stage(const DenoiserParams& teacher, int teacher_steps, DenoiserParams student_init,
                          std::span<const Example> dataset, const NoiseSchedule& s, const DistillConfig& cfg,
                          int stage_index) {
  cfg.validate();
  if (teacher_steps < 2 || teacher_steps % 2 != 0)
    throw Error(Errc::kInvalidArgument, "teacher step count must be even and >= 2");
  StageResult result;
  result.teacher_steps = teacher_steps;
  result.student_steps = teacher_steps / 2;
  if (cfg.steps_per_stage == 0) {
    result.student = std::move(student_init);
    return result;
  }
  if (dataset.empty()) throw Error(Errc::kEmptyBatch, "empty distillation set");

  const MlpDenoiser teacher_net(teacher);
  const std::vector<double> teacher_grid = make_time_grid(cfg.time_grid, teacher_steps);
  const int student_steps = result.student_steps;
  DenoiserParams student = std::move(student_init);
  Adam opt(student, cfg.lr, 0.9, 0.999, 1e-8);
  DenoiserParams g = zeros_like(student);
  const std::uint64_t stream_base = 0x5D15711ULL * static_cast<std::uint64_t>(stage_index + 1);
  CounterRng rng(cfg.seed, stream_base);
  std::vector<Example> batch(static_cast<std::size_t>(cfg.batch));
  std::vector<RegressionTerm> terms(batch.size());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  result.losses.reserve(static_cast<std::size_t>(cfg.steps_per_stage));

  for (int it = 0; it < cfg.steps_per_stage; ++it) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      batch[b] = crop_example(dataset[rng.below(dataset.size())], cfg.crop_frames, rng.next_u64());
      const Example& ex = batch[b];
      const ConditioningTrack* cond = ex.cond ? &*ex.cond : nullptr;
      // Student step i covers teacher steps 2i and 2i+1; index student_steps
      // is the terminal prediction at kTauMin.
      const auto i = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(student_steps) + 1));
      const Tensor noise = rng.normal_tensor(ex.x.values.rows(), ex.x.values.cols());
      RegressionTerm& t = terms[b];
      t.cond = cond;
      t.weight = inv_batch;
      if (static_cast<int>(i) == student_steps) {
        t.input = forward_marginal(s, ex.x, kTauMin, noise);
        t.target = teacher_net.predict_x(t.input, cond);
      } else {
        t.input = forward_marginal(s, ex.x, teacher_grid[2 * i], noise);
        t.target = distill_target(teacher_net, s, t.input, teacher_grid[2 * i + 1], teacher_grid[2 * i + 2], cond)
                       .values;
      }
    }
    for (auto span : g.tensors()) std::fill(span.begin(), span.end(), 0.0);
    const double value = regression_loss(student, terms, &g);
    if (!std::isfinite(value))
      throw Error(Errc::kNonFiniteLoss, "distillation loss non-finite at iteration " + std::to_string(it));
    result.losses.push_back(value);
    opt.step(student, g);
  }
  result.student = std::move(student);
  return result;
}

std::string StageReport::to_json() const {
  nlohmann::json j{{"stage", stage},
                   {"teacher_steps", teacher_steps},
                   {"student_steps", student_steps},
                   {"final_loss", final_loss}};
  j["quality"] = quality ? nlohmann::json(*quality) : nlohmann::json(nullptr);
  return j.dump();
}

std::vector<StageResult> progressive_distill(const DenoiserParams& teacher, std::span<const Example> dataset,
                                             const NoiseSchedule& s, const DistillConfig& cfg,
                                             const QualityFn& quality, std::vector<StageReport>* reports) {
  cfg.validate();
  std::vector<StageResult> stages;
  DenoiserParams current = teacher;
  int steps = cfg.start_steps;
  for (int k = 0; k < cfg.halvings; ++k) {
    StageResult stage = distill_stage(current, steps, current, dataset, s, cfg, k);
    std::optional<double> score;
    if (quality) score = quality(stage.student, stage.student_steps);
    if (reports) {
      StageReport r;
      r.stage = k + 1;
      r.teacher_steps = stage.teacher_steps;
      r.student_steps = stage.student_steps;
      if (!stage.losses.empty()) {
        const std::size_t tail = std::max<std::size_t>(1, stage.losses.size() / 10);
        r.final_loss = mean(std::span(stage.losses).last(tail));
      }
      r.quality = score;
      reports->push_back(r);
    }
    current = stage.student;
    steps = stage.student_steps;
    stages.push_back(std::move(stage));
  }
  return stages;
}

// ---- slimming ---------------------------------------------------------------

double validation_loss(const DenoiserParams& net, const EvalSet& eval) {
  const DiffusionDraws draws = draw_diffusion(eval.examples, eval.seed, 0xE7A1);
  return loss(net, eval.examples, eval.schedule, eval.loss, draws);
}

namespace {

double time_once(const DenoiserParams& net, const EvalSet& eval) {
  const ConditioningTrack* cond = eval.probe_cond ? &*eval.probe_cond : nullptr;
  const auto start = std::chrono::steady_clock::now();
  double sink = 0.0;
  for (int c = 0; c < std::max(eval.probe_calls, 1); ++c) sink += predict_x(net, eval.probe, cond)(0, 0);
  const auto stop = std::chrono::steady_clock::now();
  if (!std::isfinite(sink)) throw Error(Errc::kNonFiniteLoss, "probe inference produced non-finite output");
  return std::chrono::duration<double>(stop - start).count();
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

}  // namespace

LatencyStats measure_latency(const DenoiserParams& net, const EvalSet& eval, int reps) {
  if (reps < 1) throw Error(Errc::kInvalidArgument, "latency reps must be >= 1");
  time_once(net, eval);  // warm-up
  LatencyStats st;
  for (int r = 0; r < reps; ++r) st.samples.push_back(time_once(net, eval));
  st.median = median(st.samples);
  st.mean = mean(st.samples);
  st.iqr = iqr(st.samples);
  return st;
}

DenoiserParams remove_module(const DenoiserParams& net, int module_id) {
  if (module_id < 0 || module_id >= static_cast<int>(net.blocks.size()))
    throw Error(Errc::kNonRemovableModule, "no residual block " + std::to_string(module_id));
  DenoiserParams out = net;
  out.blocks.erase(out.blocks.begin() + module_id);
  return out;
}

DenoiserParams duplicate_module(const DenoiserParams& net, int module_id) {
  if (module_id < 0 || module_id >= static_cast<int>(net.blocks.size()))
    throw Error(Errc::kNonRemovableModule, "no residual block " + std::to_string(module_id));
  DenoiserParams out = net;
  out.blocks.insert(out.blocks.begin() + module_id + 1, net.blocks[static_cast<std::size_t>(module_id)]);
  return out;
}

ModuleContribution contribution_from_timings(int module_id, double score_delta, std::span<const double> full,
                                             std::span<const double> removed) {
  if (full.empty() || full.size() != removed.size())
    throw Error(Errc::kInvalidArgument, "paired timings must be non-empty and of equal length");
  std::vector<double> diffs(full.size());
  for (std::size_t i = 0; i < full.size(); ++i) diffs[i] = full[i] - removed[i];
  ModuleContribution c;
  c.module_id = module_id;
  c.score_delta = score_delta;
  c.latency_delta = median(full) - median(removed);
  // IQR / 1.349 estimates the standard deviation of a normal sample.
  c.latency_spread = iqr(diffs) / 1.349;
  if (!(c.latency_delta > 0.0) || c.latency_spread > 0.5 * std::abs(c.latency_delta))
    throw Error(Errc::kUnstableLatency, "module " + std::to_string(module_id) + ": latency delta " +
                                            std::to_string(c.latency_delta) + " s, spread " +
                                            std::to_string(c.latency_spread) + " s");
  c.ratio = c.score_delta / c.latency_delta;
  return c;
}

ModuleContribution module_contribution(const DenoiserParams& net, int module_id, const EvalSet& eval,
                                       int latency_reps) {
  if (latency_reps < 10) throw Error(Errc::kInvalidArgument, "latency needs >= 10 repetitions");
  const DenoiserParams removed = remove_module(net, module_id);
  const double score_delta = validation_loss(removed, eval) - validation_loss(net, eval);

  time_once(net, eval);
  time_once(removed, eval);
  std::vector<double> full, slim;
  for (int r = 0; r < latency_reps; ++r) {
    full.push_back(time_once(net, eval));
    slim.push_back(time_once(removed, eval));
  }
  return contribution_from_timings(module_id, score_delta, full, slim);
}

std::string SlimAction::to_json() const {
  return nlohmann::json{{"module_id", module_id},       {"action", action},
                        {"score_delta", score_delta},   {"latency_delta", latency_delta},
                        {"ratio", ratio},               {"latency_before", latency_before},
                        {"latency_after", latency_after}, {"timestamp", timestamp}}
      .dump();
}

namespace {

// Retries with more repetitions before giving up on a noisy measurement.
ModuleContribution stable_contribution(const DenoiserParams& net, int module_id, const EvalSet& eval, int reps) {
  for (int attempt = 0;; ++attempt) {
    try {
      return module_contribution(net, module_id, eval, reps << attempt);
    } catch (const Error& e) {
      if (e.code() != Errc::kUnstableLatency || attempt >= 3) throw;
    }
  }
}

std::vector<ModuleContribution> all_contributions(const DenoiserParams& net, const EvalSet& eval, int reps) {
  std::vector<ModuleContribution> out;
  for (int m = 0; m < static_cast<int>(net.blocks.size()); ++m) out.push_back(stable_contribution(net, m, eval, reps));
  return out;
}

}  // namespace

SlimResult slim_network(const DenoiserParams& net, double latency_target, const EvalSet& eval, int latency_reps) {
  if (!(latency_target > 0.0)) throw Error(Errc::kInvalidArgument, "latency target must be positive");
  SlimResult result{net, {}};
  double latency = measure_latency(result.net, eval, latency_reps).median;

  if (latency <= latency_target) {
    if (result.net.blocks.empty()) return result;
    const auto contribs = all_contributions(result.net, eval, latency_reps);
    const auto best = std::max_element(contribs.begin(), contribs.end(),
                                       [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
    result.net = duplicate_module(result.net, best->module_id);
    SlimAction a{best->module_id, "duplicate", best->score_delta, best->latency_delta, best->ratio, latency, 0.0,
                 now_seconds()};
    a.latency_after = measure_latency(result.net, eval, latency_reps).median;
    result.log.push_back(a);
    return result;
  }

  while (latency > latency_target) {
    if (result.net.blocks.empty())
      throw Error(Errc::kTargetUnreachable, "latency " + std::to_string(latency) + " s still above target " +
                                                std::to_string(latency_target) + " s with no modules left");
    const auto contribs = all_contributions(result.net, eval, latency_reps);
    const auto worst = std::min_element(contribs.begin(), contribs.end(),
                                        [](const auto& a, const auto& b) { return a.ratio < b.ratio; });
    result.net = remove_module(result.net, worst->module_id);
    SlimAction a{worst->module_id, "remove", worst->score_delta, worst->latency_delta, worst->ratio, latency, 0.0,
                 now_seconds()};
    latency = measure_latency(result.net, eval, latency_reps).median;
    a.latency_after = latency;
    result.log.push_back(a);
  }
  return result;
}

}  // namespace svcdiff
