// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "svcdiff/audio.hpp"

namespace svcdiff {

struct F0Contour {
  std::vector<double> hz;     // 0 when unvoiced
  std::vector<bool> voiced;

  std::size_t size() const { return hz.size(); }
};

struct F0Options {
  double floor_hz = 50.0;
  double ceil_hz = 1100.0;
  int channels_per_octave = 2;
  double decimated_rate = 4000.0;
  // Candidates whose four interval estimates disagree by more than this
  // (std / mean) are rejected; no surviving candidate means unvoiced.
  double reliability_threshold = 0.1;
  // Frames whose windowed RMS is below this are unvoiced outright.
  double silence_rms = 1e-4;
};

// DIO-style estimator: for each log-spaced low-pass cutoff, the filtered
// signal's negative/positive zero crossings, peaks and dips give four
// interval-based F0 tracks; the candidate with the most consistent tracks
// wins per frame. Frames are centred like mel frames (512 window, 128 hop).
F0Contour estimate_f0(const AudioClip& clip, const F0Options& opt = {}, int threads = 1);

// Centre time in seconds of analysis frame `frame`.
double frame_time(long frame, int rate = kModelRate);

}  // namespace svcdiff
