// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "svcdiff/audio.hpp"
#include "svcdiff/types.hpp"

namespace svcdiff {

inline constexpr int kFftSize = 512;
inline constexpr int kWinSize = 512;
inline constexpr int kHopSize = 128;
inline constexpr int kMelBands = 80;
inline constexpr int kSpectrumBins = kFftSize / 2 + 1;
inline constexpr double kLogFloor = 1e-5;
inline constexpr double kMelMaxHz = 20000.0;

// Real FFT of a fixed size backed by FFTW. Each instance owns its plans and
// buffers, so use one per thread.
class RealFft {
 public:
  explicit RealFft(int size);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  int size() const noexcept { return size_; }
  // size real samples -> size/2+1 complex bins (unnormalized).
  void forward(std::span<const double> in, std::span<std::complex<double>> out);
  // size/2+1 bins -> size real samples, scaled by 1/size (exact inverse).
  void inverse(std::span<const std::complex<double>> in, std::span<double> out);

 private:
  struct Impl;
  int size_;
  std::unique_ptr<Impl> impl_;
};

using ComplexFrames = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// floor((len - win) / hop) + 1 frames for len >= win, else 0.
Eigen::Index frame_count(std::size_t length);

std::vector<double> hann_window(int size);

// Hann-windowed STFT without centre padding, frames x 257.
ComplexFrames stft(std::span<const double> samples, int threads = 1);

// Least-squares inverse of stft(): windowed overlap-add divided by the summed
// squared window. Output length is (frames - 1) * hop + win.
std::vector<double> istft(const ComplexFrames& spectra, int threads = 1);

// HTK-scale triangles over [0, 20 kHz], integrated over each FFT bin's
// frequency span and normalised to unit area (weights of a band sum to 1).
// 80 x 257.
const Eigen::MatrixXd& mel_filterbank();
double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Centre frequency (Hz) of each mel band.
std::vector<double> mel_band_centers();

struct MelSpectrogram {
  Tensor frames;  // frames x 80, natural log of magnitude-mel, floored at kLogFloor
  int rate = kModelRate;
};

MelSpectrogram mel_spectrogram(const AudioClip& clip, int threads = 1);
MelSpectrogram mel_from_magnitude(const Tensor& magnitude);  // frames x 257

struct GriffinLimResult {
  AudioClip clip;
  std::vector<double> mismatch;  // ||(|STFT(x_k)| - target)|| after each iteration, k = 0..iters
};

// Mel -> linear magnitude through the filterbank pseudo-inverse (clamped at
// zero), then Griffin-Lim phase recovery starting from seeded random phase.
GriffinLimResult griffin_lim(const MelSpectrogram& mel, int iters, std::uint64_t seed = 0, int threads = 1);

// Weighted Frobenius distance between |stft(x)| and a target magnitude,
// counting interior bins twice (full-spectrum norm).
double spectral_mismatch(const ComplexFrames& spectra, const Tensor& target_magnitude);

// DCT-II of each log-mel frame, coefficients [first, first + count).
Tensor mel_cepstrum(const Tensor& log_mel, int first = 1, int count = 20);

}  // namespace svcdiff
