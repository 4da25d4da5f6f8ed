// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "svcdiff/audio.hpp"
#include "svcdiff/sampler.hpp"
#include "svcdiff/schedule.hpp"
#include "svcdiff/types.hpp"

namespace svcdiff {

// Fixed affine map between log-mel and the roughly unit-scale space the
// denoiser works in. Constants, not data statistics, so every model and
// tool agrees on it.
struct MelNormalizer {
  double center = -4.0;
  double scale = 4.0;

  Tensor normalize(const Tensor& log_mel) const { return (log_mel.array() - center) / scale; }
  Tensor denormalize(const Tensor& z) const { return z.array() * scale + center; }
};

struct StageTiming {
  std::string name;
  double seconds = 0.0;  // median over repetitions
};

struct BenchReport {
  double audio_seconds = 0.0;
  std::vector<StageTiming> stages;
  double wall_seconds = 0.0;  // median total
  double wall_iqr = 0.0;
  std::vector<double> wall_samples;
  double rtf = 0.0;  // wall_seconds / audio_seconds
  int threads = 1;
  SamplerMode mode = SamplerMode::kDdim;
  int steps = 0;
  int repetitions = 0;

  double stage_seconds(const std::string& name) const;
  std::string to_json() const;
};

struct PipelineOptions {
  int threads = 1;
  int repetitions = 1;
  int griffin_lim_iters = 32;
  bool warmup = true;  // one discarded run before timing
  MelNormalizer normalizer;
};

struct PipelineOutput {
  AudioClip clip;
  BenchReport report;
};

// Stages, each timed: preprocess (resample to 40 kHz, normalise), features
// (mel, F0, content, conditioning), sampling (diffusion in normalised mel
// space), reconstruction (denormalise, Griffin-Lim).
PipelineOutput run_pipeline(const AudioClip& clip, const Denoiser& denoiser, const NoiseSchedule& s,
                            const SamplerConfig& cfg, const PipelineOptions& opt = {});

// Mean Euclidean distance between mel-cepstra (c1..c20) of aligned frames,
// scaled to the usual dB-like units. Clips must share a rate; the shorter
// one sets the number of frames compared.
double mel_cepstral_distance(const AudioClip& a, const AudioClip& b);

// Picks the denoiser to use for a given sampler step count.
using DenoiserChain = std::function<const Denoiser&(int steps)>;

std::vector<BenchReport> step_sweep(const DenoiserChain& chain, const AudioClip& clip, const NoiseSchedule& s,
                                    const SamplerConfig& base, std::span<const int> steps_list,
                                    std::span<const int> threads_list, const PipelineOptions& opt = {});

void write_jsonl(const std::filesystem::path& path, std::span<const BenchReport> reports);
void write_csv_summary(const std::filesystem::path& path, std::span<const BenchReport> reports);
// RTF against step count, one polyline per thread count.
void write_svg_plot(const std::filesystem::path& path, std::span<const BenchReport> reports);

}  // namespace svcdiff
