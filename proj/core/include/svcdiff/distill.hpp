// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svcdiff/denoiser.hpp"
#include "svcdiff/sampler.hpp"
#include "svcdiff/schedule.hpp"

namespace svcdiff {

struct DistillConfig {
  int start_steps = 64;
  int halvings = 3;
  int steps_per_stage = 1000;
  double lr = 5e-5;
  std::uint64_t seed = 0;
  int batch = 8;
  int crop_frames = 0;
  TimeGrid time_grid = TimeGrid::kUniform;

  void validate() const;
};

// The x that makes one student DDIM step tau -> rho_end land where two
// teacher DDIM steps tau -> rho_mid -> rho_end land.
DataSample distill_target(const Denoiser& teacher, const NoiseSchedule& s, const LatentState& y_tau,
                          double rho_mid, double rho_end, const ConditioningTrack* cond = nullptr);

struct StageResult {
  DenoiserParams student;
  int teacher_steps = 0;
  int student_steps = 0;
  std::vector<double> losses;
};

// Trains `student_init` against a teacher that samples with `teacher_steps`
// steps; the student samples with half as many. Zero training iterations
// return the initial student unchanged.
StageResult distill_stage(const DenoiserParams& teacher, int teacher_steps, DenoiserParams student_init,
                          std::span<const Example> dataset, const NoiseSchedule& s, const DistillConfig& cfg,
                          int stage_index = 0);

struct StageReport {
  int stage = 0;
  int teacher_steps = 0;
  int student_steps = 0;
  double final_loss = 0.0;  // mean of the last tenth of the loss curve
  std::optional<double> quality;

  std::string to_json() const;
};

// Optional per-stage sample-quality hook: (student, its step count) -> score.
using QualityFn = std::function<double(const DenoiserParams&, int)>;

// Each stage's student (initialised from its teacher) becomes the next teacher.
std::vector<StageResult> progressive_distill(const DenoiserParams& teacher, std::span<const Example> dataset,
                                             const NoiseSchedule& s, const DistillConfig& cfg,
                                             const QualityFn& quality = {},
                                             std::vector<StageReport>* reports = nullptr);

// ---- latency-aware slimming -------------------------------------------------

// Everything needed to score a network: a fixed validation loss (quality,
// lower is better) and a fixed-shape latency probe.
struct EvalSet {
  std::vector<Example> examples;
  NoiseSchedule schedule;
  LossConfig loss;
  std::uint64_t seed = 0;
  LatentState probe;
  std::optional<ConditioningTrack> probe_cond;
  int probe_calls = 1;  // inference calls per timed run
};

double validation_loss(const DenoiserParams& net, const EvalSet& eval);

struct LatencyStats {
  double median = 0.0;
  double mean = 0.0;
  double iqr = 0.0;
  std::vector<double> samples;
};

// Median over `reps` timed runs after one discarded warm-up run.
LatencyStats measure_latency(const DenoiserParams& net, const EvalSet& eval, int reps);

struct ModuleContribution {
  int module_id = 0;
  double score_delta = 0.0;    // quality lost by removing the module (score = -validation loss)
  double latency_delta = 0.0;  // seconds saved by removing it (difference of medians)
  double latency_spread = 0.0; // robust std of the paired per-run differences
  double ratio = 0.0;          // score_delta / latency_delta
};

DenoiserParams remove_module(const DenoiserParams& net, int module_id);
DenoiserParams duplicate_module(const DenoiserParams& net, int module_id);  // copy inserted right after

// Builds a contribution from paired full/removed timings (seconds). Throws
// UnstableLatency unless the latency saved is positive and the robust spread
// of the paired differences is at most half of it.
ModuleContribution contribution_from_timings(int module_id, double score_delta, std::span<const double> full,
                                             std::span<const double> removed);

ModuleContribution module_contribution(const DenoiserParams& net, int module_id, const EvalSet& eval,
                                       int latency_reps = 10);

struct SlimAction {
  int module_id = 0;
  std::string action;  // "remove" or "duplicate"
  double score_delta = 0.0;
  double latency_delta = 0.0;
  double ratio = 0.0;
  double latency_before = 0.0;
  double latency_after = 0.0;
  double timestamp = 0.0;  // seconds since the Unix epoch

  std::string to_json() const;
};

struct SlimResult {
  DenoiserParams net;
  std::vector<SlimAction> log;
};

// While the measured median latency exceeds the target, removes the module
// with the lowest score/latency ratio. A network already under target gets
// its highest-ratio module duplicated once instead.
SlimResult slim_network(const DenoiserParams& net, double latency_target, const EvalSet& eval,
                        int latency_reps = 10);

}  // namespace svcdiff
