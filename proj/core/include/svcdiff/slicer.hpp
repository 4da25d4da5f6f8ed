// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "svcdiff/audio.hpp"

namespace svcdiff {

struct SlicerConfig {
  double silence_db = -40.0;  // dBFS RMS threshold
  double min_silence = 0.3;   // seconds of silence needed to cut
  double max_segment = 30.0;  // outputs are strictly shorter than this
  double min_segment = 0.5;   // shorter segments are dropped

  void validate() const;
};

struct Segment {
  AudioClip clip;
  double start_sec = 0.0;
  double end_sec = 0.0;
};

inline constexpr double kRmsWindowSec = 0.020;

// Cuts at silent runs (20 ms RMS windows below silence_db lasting at least
// min_silence), trims silence from segment edges, drops segments shorter
// than min_segment and splits long ones at their quietest interior window.
std::vector<Segment> slice_segments(const AudioClip& clip, const SlicerConfig& cfg);
std::vector<AudioClip> slice_audio(const AudioClip& clip, const SlicerConfig& cfg);

// Re-windows every clip at every size with hop = size * (1 - overlap). An
// uncovered tail of at least half a window is kept as its own clip.
std::vector<AudioClip> augment(std::span<const AudioClip> clips, std::span<const double> sizes, double overlap);

}  // namespace svcdiff
