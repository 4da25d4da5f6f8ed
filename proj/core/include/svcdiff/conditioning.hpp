// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "svcdiff/f0.hpp"
#include "svcdiff/spectral.hpp"
#include "svcdiff/types.hpp"

namespace svcdiff {

inline constexpr int kContentDim = 20;
inline constexpr std::uint64_t kProjectionSeed = 0x5EEDC0DEULL;

// Pitch-robust content stand-in: mel-cepstral coefficients 1..20 of each
// frame, mean/variance normalised per coefficient over the utterance
// (coefficients with zero variance become zero).
Tensor content_features(const MelSpectrogram& mel);

// Per frame [log(1 + hz), voiced, content...] mapped through a fixed seeded
// Gaussian projection to 256 dimensions.
ConditioningTrack build_conditioning(const F0Contour& f0, const Tensor& content,
                                     std::uint64_t seed = kProjectionSeed);

}  // namespace svcdiff
