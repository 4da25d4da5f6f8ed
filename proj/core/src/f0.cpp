// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/f0.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "svcdiff/error.hpp"
#include "svcdiff/parallel.hpp"
#include "svcdiff/spectral.hpp"

namespace svcdiff {
namespace {

constexpr double kInvalidScore = std::numeric_limits<double>::infinity();

// Interval-based F0 estimates located at interval midpoints (seconds).
struct EventTrack {
  std::vector<double> times;
  std::vector<double> hz;
};

std::vector<double> nuttall(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = 2.0 * std::numbers::pi * i / (n - 1);
    w[static_cast<std::size_t>(i)] = 0.355768 - 0.487396 * std::cos(x) + 0.144232 * std::cos(2 * x) - 0.012604 * std::cos(3 * x);
  }
  return w;
}

// Zero-phase low-pass: convolution with a unit-gain Nuttall window of
// length 2 * rate / cutoff.
std::vector<double> lowpass(const std::vector<double>& x, double rate, double cutoff) {
  const int half = std::max(1, static_cast<int>(std::lround(rate / cutoff / 2.0)));
  std::vector<double> kernel = nuttall(4 * half + 1);
  double sum = 0.0;
  for (double k : kernel) sum += k;
  for (double& k : kernel) k /= sum;
  const long n = static_cast<long>(x.size());
  const long centre = 2 * half;
  std::vector<double> y(x.size(), 0.0);
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    const long j_lo = std::max(0L, i - centre);
    const long j_hi = std::min(n - 1, i + centre);
    for (long j = j_lo; j <= j_hi; ++j) acc += x[static_cast<std::size_t>(j)] * kernel[static_cast<std::size_t>(j - i + centre)];
    y[static_cast<std::size_t>(i)] = acc;
  }
  return y;
}

// Crossing locations (fractional sample index + offset) where the series
// changes sign in the requested direction.
std::vector<double> crossings(const std::vector<double>& s, bool rising, double offset) {
  std::vector<double> at;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const double a = s[i], b = s[i + 1];
    const bool hit = rising ? (a < 0.0 && b >= 0.0) : (a > 0.0 && b <= 0.0);
    if (hit) at.push_back(static_cast<double>(i) + a / (a - b) + offset);
  }
  return at;
}

EventTrack track_from(const std::vector<double>& locations, double rate) {
  EventTrack t;
  for (std::size_t i = 0; i + 1 < locations.size(); ++i) {
    const double interval = locations[i + 1] - locations[i];
    if (interval <= 0) continue;
    t.times.push_back(0.5 * (locations[i] + locations[i + 1]) / rate);
    t.hz.push_back(rate / interval);
  }
  return t;
}

// Linear interpolation, holding the end values outside the track.
double interp(const EventTrack& t, double time) {
  if (time <= t.times.front()) return t.hz.front();
  if (time >= t.times.back()) return t.hz.back();
  const auto it = std::upper_bound(t.times.begin(), t.times.end(), time);
  const std::size_t hi = static_cast<std::size_t>(it - t.times.begin());
  const std::size_t lo = hi - 1;
  const double w = (time - t.times[lo]) / (t.times[hi] - t.times[lo]);
  return t.hz[lo] + w * (t.hz[hi] - t.hz[lo]);
}

struct BandCandidates {
  std::vector<double> hz;
  std::vector<double> score;
};

BandCandidates band_candidates(const std::vector<double>& signal, double rate, double boundary,
                               const std::vector<double>& times, const F0Options& opt) {
  BandCandidates out{std::vector<double>(times.size(), 0.0), std::vector<double>(times.size(), kInvalidScore)};
  const std::vector<double> filtered = lowpass(signal, rate, boundary);
  std::vector<double> slope(filtered.size() > 1 ? filtered.size() - 1 : 0);
  for (std::size_t i = 0; i + 1 < filtered.size(); ++i) slope[i] = filtered[i + 1] - filtered[i];

  const EventTrack tracks[4] = {
      track_from(crossings(filtered, false, 0.0), rate),
      track_from(crossings(filtered, true, 0.0), rate),
      track_from(crossings(slope, false, 0.5), rate),  // peaks
      track_from(crossings(slope, true, 0.5), rate),   // dips
  };
  for (const auto& t : tracks)
    if (t.times.size() < 2) return out;

  for (std::size_t f = 0; f < times.size(); ++f) {
    double v[4];
    double m = 0.0;
    for (int k = 0; k < 4; ++k) {
      v[k] = interp(tracks[k], times[f]);
      m += v[k];
    }
    m /= 4.0;
    double var = 0.0;
    for (double e : v) var += (e - m) * (e - m);
    const double score = std::sqrt(var / 4.0) / m;
    const bool in_band = m <= boundary && m >= boundary / 2.0;
    const bool in_range = m >= opt.floor_hz && m <= opt.ceil_hz;
    if (in_band && in_range) {
      out.hz[f] = m;
      out.score[f] = score;
    }
  }
  return out;
}

}  // namespace

double frame_time(long frame, int rate) {
  return (static_cast<double>(frame) * kHopSize + kWinSize / 2.0) / rate;
}

F0Contour estimate_f0(const AudioClip& clip, const F0Options& opt, int threads) {
  if (clip.rate != kModelRate)
    throw Error(Errc::kInvalidRate, "F0 estimation expects " + std::to_string(kModelRate) + " Hz input");
  if (clip.samples.size() < static_cast<std::size_t>(kWinSize))
    throw Error(Errc::kClipTooShort, "clip shorter than one analysis window");
  const Eigen::Index frames = frame_count(clip.samples.size());
  std::vector<double> times(static_cast<std::size_t>(frames));
  for (Eigen::Index f = 0; f < frames; ++f) times[static_cast<std::size_t>(f)] = frame_time(f);

  const AudioClip decimated = resample(clip, static_cast<int>(opt.decimated_rate));
  const double rate = decimated.rate;
  // The decimated signal starts at t = 0 like the original.

  std::vector<double> boundaries;
  const int bands = static_cast<int>(std::ceil(std::log2(opt.ceil_hz / opt.floor_hz) * opt.channels_per_octave)) + 1;
  for (int b = 0; b < bands; ++b) boundaries.push_back(opt.floor_hz * std::pow(2.0, static_cast<double>(b) / opt.channels_per_octave));

  std::vector<BandCandidates> per_band(boundaries.size());
  parallel_for(boundaries.size(), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t b = begin; b < end; ++b)
      per_band[b] = band_candidates(decimated.samples, rate, boundaries[b], times, opt);
  });

  F0Contour out;
  out.hz.assign(times.size(), 0.0);
  out.voiced.assign(times.size(), false);
  for (std::size_t f = 0; f < times.size(); ++f) {
    double energy = 0.0;
    const std::size_t at = f * kHopSize;
    for (int i = 0; i < kWinSize; ++i) energy += clip.samples[at + static_cast<std::size_t>(i)] * clip.samples[at + static_cast<std::size_t>(i)];
    if (std::sqrt(energy / kWinSize) < opt.silence_rms) continue;
    double best = kInvalidScore, best_hz = 0.0;
    for (const auto& band : per_band) {
      if (band.score[f] < best) {
        best = band.score[f];
        best_hz = band.hz[f];
      }
    }
    if (best < opt.reliability_threshold) {
      out.hz[f] = best_hz;
      out.voiced[f] = true;
    }
  }
  return out;
}

}  // namespace svcdiff
