// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <vector>

namespace svcdiff {

inline constexpr int kModelRate = 40000;

struct AudioClip {
  std::vector<double> samples;
  int rate = kModelRate;

  double seconds() const { return rate > 0 ? static_cast<double>(samples.size()) / rate : 0.0; }
};

enum class WavEncoding { kPcm16, kFloat32 };

// Reads 16-bit PCM or 32-bit float WAV; multi-channel input is averaged to mono.
AudioClip read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioClip& clip, WavEncoding encoding = WavEncoding::kFloat32);

// Windowed-sinc (Kaiser) polyphase resampling. Output length is
// ceil(n * target / rate), so duration is kept within one sample period.
AudioClip resample(const AudioClip& clip, int target_rate = kModelRate);

// Scales to a peak absolute amplitude of 0.95; silence is returned unchanged.
AudioClip normalize(const AudioClip& clip);

inline constexpr double kNormalizedPeak = 0.95;

}  // namespace svcdiff
