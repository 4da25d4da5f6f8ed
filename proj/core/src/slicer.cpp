// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/slicer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svcdiff/error.hpp"

namespace svcdiff {

void SlicerConfig::validate() const {
  if (!(max_segment > 0.0 && max_segment <= 30.0))
    throw Error(Errc::kInvalidArgument, "max_segment must lie in (0, 30] seconds");
  if (min_silence < 0.0 || min_segment < 0.0) throw Error(Errc::kInvalidArgument, "durations must be >= 0");
  if (min_segment >= max_segment) throw Error(Errc::kInvalidArgument, "min_segment must be below max_segment");
}

namespace {

struct Span {
  std::size_t begin;  // window indices, end exclusive
  std::size_t end;
};

void split_long(const std::vector<double>& rms, Span span, std::size_t max_windows, std::vector<Span>& out) {
  const std::size_t n = span.end - span.begin;
  if (n < max_windows || n < 3) {
    out.push_back(span);
    return;
  }
  // Prefer a cut that leaves both halves under the cap; fall back to the
  // middle half for very long spans.
  std::size_t lo, hi;
  if (n < 2 * max_windows) {
    lo = n - max_windows + 1;
    hi = max_windows - 1;
  } else {
    lo = n / 4;
    hi = 3 * n / 4;
  }
  lo = std::max<std::size_t>(lo, 1);
  hi = std::min(hi, n - 1);
  std::size_t cut = lo;
  for (std::size_t i = lo; i <= hi; ++i)
    if (rms[span.begin + i] < rms[span.begin + cut]) cut = i;
  split_long(rms, {span.begin, span.begin + cut}, max_windows, out);
  split_long(rms, {span.begin + cut, span.end}, max_windows, out);
}

}  // namespace

std::vector<Segment> slice_segments(const AudioClip& clip, const SlicerConfig& cfg) {
  cfg.validate();
  if (clip.rate <= 0) throw Error(Errc::kInvalidRate, "clip rate must be positive");
  const std::size_t win = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(kRmsWindowSec * clip.rate)));
  const std::size_t windows = (clip.samples.size() + win - 1) / win;
  std::vector<double> rms(windows);
  std::vector<bool> silent(windows);
  const double threshold = std::pow(10.0, cfg.silence_db / 20.0);
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t a = w * win;
    const std::size_t b = std::min(clip.samples.size(), a + win);
    double acc = 0.0;
    for (std::size_t i = a; i < b; ++i) acc += clip.samples[i] * clip.samples[i];
    rms[w] = std::sqrt(acc / static_cast<double>(b - a));
    silent[w] = rms[w] < threshold;
  }

  // Silent runs long enough to cut; shorter pauses stay inside segments.
  const std::size_t min_silent_windows =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.min_silence * clip.rate / win - 1e-9)));
  std::vector<bool> cut(windows, false);
  for (std::size_t w = 0; w < windows;) {
    if (!silent[w]) {
      ++w;
      continue;
    }
    std::size_t end = w;
    while (end < windows && silent[end]) ++end;
    const bool edge = w == 0 || end == windows;
    if (end - w >= min_silent_windows || edge)
      for (std::size_t i = w; i < end; ++i) cut[i] = true;
    w = end;
  }

  std::vector<Span> spans;
  for (std::size_t w = 0; w < windows;) {
    if (cut[w]) {
      ++w;
      continue;
    }
    std::size_t end = w;
    while (end < windows && !cut[end]) ++end;
    spans.push_back({w, end});
    w = end;
  }

  // A span of max_windows windows may exceed the cap by the ragged final
  // window, so cap at whole windows strictly below max_segment.
  const std::size_t max_windows =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.max_segment * clip.rate / win - 1e-9)));
  std::vector<Span> capped;
  for (const auto& s : spans) split_long(rms, s, max_windows, capped);

  std::vector<Segment> out;
  for (const auto& s : capped) {
    const std::size_t a = s.begin * win;
    const std::size_t b = std::min(clip.samples.size(), s.end * win);
    const double seconds = static_cast<double>(b - a) / clip.rate;
    if (seconds < cfg.min_segment || seconds >= cfg.max_segment || b <= a) continue;
    Segment seg;
    seg.clip.rate = clip.rate;
    seg.clip.samples.assign(clip.samples.begin() + static_cast<std::ptrdiff_t>(a),
                            clip.samples.begin() + static_cast<std::ptrdiff_t>(b));
    seg.start_sec = static_cast<double>(a) / clip.rate;
    seg.end_sec = static_cast<double>(b) / clip.rate;
    out.push_back(std::move(seg));
  }
  return out;
}

std::vector<AudioClip> slice_audio(const AudioClip& clip, const SlicerConfig& cfg) {
  std::vector<AudioClip> out;
  for (auto& s : slice_segments(clip, cfg)) out.push_back(std::move(s.clip));
  return out;
}

std::vector<AudioClip> augment(std::span<const AudioClip> clips, std::span<const double> sizes, double overlap) {
  if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(Errc::kInvalidOverlap, "overlap must lie in [0, 1)");
  for (double s : sizes)
    if (!(s > 0.0)) throw Error(Errc::kInvalidArgument, "window sizes must be positive");
  std::vector<AudioClip> out;
  for (const auto& clip : clips) {
    const std::size_t n = clip.samples.size();
    for (double size_sec : sizes) {
      const auto size = static_cast<std::size_t>(std::llround(size_sec * clip.rate));
      const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(size_sec * (1.0 - overlap) * clip.rate)));
      std::size_t covered = 0;
      for (std::size_t start = 0; size > 0 && start + size <= n; start += hop) {
        out.push_back({{clip.samples.begin() + static_cast<std::ptrdiff_t>(start),
                        clip.samples.begin() + static_cast<std::ptrdiff_t>(start + size)},
                       clip.rate});
        covered = start + size;
      }
      if (n > covered && 2 * (n - covered) >= size)
        out.push_back({{clip.samples.begin() + static_cast<std::ptrdiff_t>(covered), clip.samples.end()}, clip.rate});
    }
  }
  return out;
}

}  // namespace svcdiff
