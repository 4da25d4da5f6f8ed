// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include <benchmark/benchmark.h>

#include "svcdiff/audio.hpp"
#include "svcdiff/conditioning.hpp"
#include "svcdiff/denoiser.hpp"
#include "svcdiff/f0.hpp"
#include "svcdiff/rng.hpp"
#include "svcdiff/sampler.hpp"
#include "svcdiff/schedule.hpp"
#include "svcdiff/spectral.hpp"

namespace {

using namespace svcdiff;

AudioClip tone(double seconds) {
  AudioClip c{std::vector<double>(static_cast<std::size_t>(seconds * kModelRate)), kModelRate};
  for (std::size_t i = 0; i < c.samples.size(); ++i) {
    const double t = static_cast<double>(i) / kModelRate;
    c.samples[i] = 0.3 * std::sin(2 * std::numbers::pi * 220.0 * t) + 0.1 * std::sin(2 * std::numbers::pi * 660.0 * t);
  }
  return c;
}

void BM_MelSpectrogram(benchmark::State& state) {
  const AudioClip clip = tone(5.0);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mel_spectrogram(clip, threads));
  state.counters["audio_s_per_s"] = benchmark::Counter(5.0 * static_cast<double>(state.iterations()),
                                                       benchmark::Counter::kIsRate);
}
BENCHMARK(BM_MelSpectrogram)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_EstimateF0(benchmark::State& state) {
  const AudioClip clip = tone(5.0);
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_f0(clip, {}, threads));
}
BENCHMARK(BM_EstimateF0)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Resample16kTo40k(benchmark::State& state) {
  AudioClip clip = tone(5.0);
  clip = resample(clip, 16000);
  for (auto _ : state) benchmark::DoNotOptimize(resample(clip, kModelRate));
}
BENCHMARK(BM_Resample16kTo40k)->Unit(benchmark::kMillisecond);

void BM_PredictX(benchmark::State& state) {
  DenoiserArch arch;
  arch.widths = {128, 128, 128};
  const DenoiserParams p = init_denoiser(arch, 1);
  CounterRng rng(2);
  const Eigen::Index frames = state.range(0);
  const LatentState y{rng.normal_tensor(frames, kMelBands), 0.5};
  const ConditioningTrack cond{rng.normal_tensor(frames, kConditioningDim)};
  for (auto _ : state) benchmark::DoNotOptimize(predict_x(p, y, &cond));
  state.SetItemsProcessed(state.iterations() * frames);
}
BENCHMARK(BM_PredictX)->Arg(64)->Arg(512)->Unit(benchmark::kMicrosecond);

void BM_DdimSample(benchmark::State& state) {
  DenoiserArch arch;
  arch.widths = {64, 64};
  const MlpDenoiser model(init_denoiser(arch, 3));
  const NoiseSchedule s = make_schedule(ScheduleKind::kVpCosine);
  CounterRng rng(4);
  const ConditioningTrack cond{rng.normal_tensor(128, kConditioningDim)};
  SamplerConfig cfg;
  cfg.steps = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample(s, model, cfg, &cond, 128, kMelBands));
}
BENCHMARK(BM_DdimSample)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_GriffinLim(benchmark::State& state) {
  const MelSpectrogram mel = mel_spectrogram(tone(2.0));
  const int iters = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(griffin_lim(mel, iters, 0, 1));
}
BENCHMARK(BM_GriffinLim)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
