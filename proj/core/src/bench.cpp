// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "svcdiff/conditioning.hpp"
#include "svcdiff/error.hpp"
#include "svcdiff/f0.hpp"
#include "svcdiff/spectral.hpp"
#include "svcdiff/stats.hpp"

namespace svcdiff {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

const char* const kStageNames[] = {"preprocess", "features", "sampling", "reconstruction"};

struct RunResult {
  AudioClip clip;
  double stage[4] = {0, 0, 0, 0};
  double total = 0.0;
};

RunResult run_once(const AudioClip& input, const Denoiser& denoiser, const NoiseSchedule& s,
                   const SamplerConfig& cfg, const PipelineOptions& opt) {
  RunResult r;
  const auto start = Clock::now();

  auto t = Clock::now();
  const AudioClip clip = normalize(resample(input, kModelRate));
  r.stage[0] = since(t);

  t = Clock::now();
  const MelSpectrogram mel = mel_spectrogram(clip, opt.threads);
  const F0Contour f0 = estimate_f0(clip, {}, opt.threads);
  const ConditioningTrack cond = build_conditioning(f0, content_features(mel));
  r.stage[1] = since(t);

  t = Clock::now();
  const DataSample z = sample(s, denoiser, cfg, &cond, mel.frames.rows(), kMelBands);
  r.stage[2] = since(t);

  t = Clock::now();
  MelSpectrogram out_mel;
  out_mel.frames = opt.normalizer.denormalize(z.values).cwiseMax(std::log(kLogFloor));
  r.clip = griffin_lim(out_mel, opt.griffin_lim_iters, cfg.seed, opt.threads).clip;
  r.stage[3] = since(t);

  r.total = since(start);
  return r;
}

}  // namespace

double BenchReport::stage_seconds(const std::string& name) const {
  for (const auto& st : stages)
    if (st.name == name) return st.seconds;
  throw Error(Errc::kInvalidArgument, "no stage named " + name);
}

std::string BenchReport::to_json() const {
  nlohmann::ordered_json j;
  j["audio_seconds"] = audio_seconds;
  j["wall_seconds"] = wall_seconds;
  j["wall_iqr"] = wall_iqr;
  j["rtf"] = rtf;
  j["threads"] = threads;
  j["mode"] = std::string(to_string(mode));
  j["steps"] = steps;
  j["repetitions"] = repetitions;
  nlohmann::ordered_json st = nlohmann::ordered_json::object();
  for (const auto& s : stages) st[s.name] = s.seconds;
  j["stages"] = st;
  j["wall_samples"] = wall_samples;
  return j.dump();
}

PipelineOutput run_pipeline(const AudioClip& clip, const Denoiser& denoiser, const NoiseSchedule& s,
                            const SamplerConfig& cfg, const PipelineOptions& opt) {
  cfg.validate();
  if (opt.repetitions < 1) throw Error(Errc::kInvalidArgument, "repetitions must be >= 1");
  if (opt.threads < 1) throw Error(Errc::kInvalidArgument, "threads must be >= 1");
  if (clip.samples.empty()) throw Error(Errc::kEmptyClip, "empty input clip");
  if (clip.rate <= 0) throw Error(Errc::kInvalidRate, "clip rate must be positive");

  if (opt.warmup) (void)run_once(clip, denoiser, s, cfg, opt);
  std::vector<double> totals;
  std::vector<double> per_stage[4];
  PipelineOutput out;
  for (int rep = 0; rep < opt.repetitions; ++rep) {
    RunResult r = run_once(clip, denoiser, s, cfg, opt);
    totals.push_back(r.total);
    for (int k = 0; k < 4; ++k) per_stage[k].push_back(r.stage[k]);
    if (rep + 1 == opt.repetitions) out.clip = std::move(r.clip);
  }

  BenchReport& rep = out.report;
  rep.audio_seconds = clip.seconds();
  for (int k = 0; k < 4; ++k) rep.stages.push_back({kStageNames[k], median(per_stage[k])});
  rep.wall_seconds = median(totals);
  rep.wall_iqr = iqr(totals);
  rep.wall_samples = totals;
  rep.rtf = rep.wall_seconds / rep.audio_seconds;
  rep.threads = opt.threads;
  rep.mode = cfg.mode;
  rep.steps = cfg.steps;
  rep.repetitions = opt.repetitions;
  return out;
}

double mel_cepstral_distance(const AudioClip& a, const AudioClip& b) {
  if (a.samples.empty() || b.samples.empty()) throw Error(Errc::kEmptyClip, "mel-cepstral distance of an empty clip");
  if (a.rate != b.rate) throw Error(Errc::kInvalidRate, "mel-cepstral distance needs equal rates");
  const Tensor ca = mel_cepstrum(mel_spectrogram(resample(a, kModelRate)).frames, 1, kContentDim);
  const Tensor cb = mel_cepstrum(mel_spectrogram(resample(b, kModelRate)).frames, 1, kContentDim);
  const Eigen::Index n = std::min(ca.rows(), cb.rows());
  // Conventional MCD scaling: natural-log cepstra to decibels.
  const double k = 10.0 / std::numbers::ln10 * std::numbers::sqrt2;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += (ca.row(i) - cb.row(i)).norm();
  return k * acc / static_cast<double>(n);
}

std::vector<BenchReport> step_sweep(const DenoiserChain& chain, const AudioClip& clip, const NoiseSchedule& s,
                                    const SamplerConfig& base, std::span<const int> steps_list,
                                    std::span<const int> threads_list, const PipelineOptions& opt) {
  if (steps_list.empty() || threads_list.empty())
    throw Error(Errc::kInvalidArgument, "step sweep needs non-empty step and thread lists");
  std::vector<BenchReport> reports;
  for (int threads : threads_list) {
    for (int steps : steps_list) {
      SamplerConfig cfg = base;
      cfg.steps = steps;
      PipelineOptions o = opt;
      o.threads = threads;
      reports.push_back(run_pipeline(clip, chain(steps), s, cfg, o).report);
    }
  }
  return reports;
}

void write_jsonl(const std::filesystem::path& path, std::span<const BenchReport> reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  for (const auto& r : reports) out << r.to_json() << '\n';
}

void write_csv_summary(const std::filesystem::path& path, std::span<const BenchReport> reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  out << "threads,mode,steps,repetitions,audio_seconds,wall_seconds,wall_iqr,rtf";
  if (!reports.empty())
    for (const auto& st : reports.front().stages) out << ',' << st.name << "_seconds";
  out << '\n';
  out.precision(9);
  for (const auto& r : reports) {
    out << r.threads << ',' << to_string(r.mode) << ',' << r.steps << ',' << r.repetitions << ',' << r.audio_seconds
        << ',' << r.wall_seconds << ',' << r.wall_iqr << ',' << r.rtf;
    for (const auto& st : r.stages) out << ',' << st.seconds;
    out << '\n';
  }
}

void write_svg_plot(const std::filesystem::path& path, std::span<const BenchReport> reports) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::kIo, "cannot write " + path.string());
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 30, B = 50;
  std::map<int, std::vector<std::pair<int, double>>> series;
  double max_rtf = 0.0;
  int min_steps = 1 << 30, max_steps = 1;
  for (const auto& r : reports) {
    series[r.threads].emplace_back(r.steps, r.rtf);
    max_rtf = std::max(max_rtf, r.rtf);
    min_steps = std::min(min_steps, r.steps);
    max_steps = std::max(max_steps, r.steps);
  }
  if (max_rtf <= 0.0) max_rtf = 1.0;
  // Log-2 step axis: sweeps are usually powers of two.
  const double lx0 = std::log2(std::max(1, min_steps));
  const double lx1 = std::max(lx0 + 1.0, std::log2(std::max(1, max_steps)));
  auto px = [&](int steps) { return L + (std::log2(steps) - lx0) / (lx1 - lx0) * (W - L - R); };
  auto py = [&](double rtf) { return H - B - rtf / (1.1 * max_rtf) * (H - T - B); };
  const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"13\">sampler steps</text>\n";
  out << "<text x=\"16\" y=\"" << H / 2 << "\" transform=\"rotate(-90 16 " << H / 2
      << ")\" text-anchor=\"middle\" font-size=\"13\">real-time factor</text>\n";
  std::set<int> ticks;
  for (const auto& r : reports) ticks.insert(r.steps);
  for (int s : ticks)
    out << "<text x=\"" << px(s) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << s
        << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = 1.1 * max_rtf * i / 4.0;
    std::ostringstream label;
    label.precision(3);
    label << v;
    out << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << label.str()
        << "</text>\n";
  }
  std::size_t c = 0;
  for (auto& [threads, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const char* color = colors[c++ % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [steps, rtf] : pts) out << px(steps) << ',' << py(rtf) << ' ';
    out << "\"/>\n";
    for (const auto& [steps, rtf] : pts)
      out << "<circle cx=\"" << px(steps) << "\" cy=\"" << py(rtf) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << W - R - 90 << "\" y=\"" << T + 16 * c << "\" fill=\"" << color << "\" font-size=\"12\">"
        << threads << (threads == 1 ? " thread" : " threads") << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace svcdiff
