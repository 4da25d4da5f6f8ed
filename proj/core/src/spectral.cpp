// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>
#include <string>

#include <Eigen/SVD>

#include "svcdiff/error.hpp"
#include "svcdiff/parallel.hpp"
#include "svcdiff/rng.hpp"

namespace svcdiff {
namespace {

// FFTW's planner is not thread-safe; execution on distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct RealFft::Impl {
  double* real = nullptr;
  fftw_complex* spectrum = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

RealFft::RealFft(int size) : size_(size), impl_(std::make_unique<Impl>()) {
  if (size < 2) throw Error(Errc::kInvalidArgument, "FFT size must be >= 2");
  std::lock_guard lock(planner_mutex());
  impl_->real = fftw_alloc_real(static_cast<std::size_t>(size));
  impl_->spectrum = fftw_alloc_complex(static_cast<std::size_t>(size / 2 + 1));
  impl_->forward = fftw_plan_dft_r2c_1d(size, impl_->real, impl_->spectrum, FFTW_ESTIMATE);
  impl_->inverse = fftw_plan_dft_c2r_1d(size, impl_->spectrum, impl_->real, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(impl_->forward);
  fftw_destroy_plan(impl_->inverse);
  fftw_free(impl_->real);
  fftw_free(impl_->spectrum);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
  std::copy(in.begin(), in.end(), impl_->real);
  fftw_execute(impl_->forward);
  for (int k = 0; k <= size_ / 2; ++k) out[static_cast<std::size_t>(k)] = {impl_->spectrum[k][0], impl_->spectrum[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
  for (int k = 0; k <= size_ / 2; ++k) {
    impl_->spectrum[k][0] = in[static_cast<std::size_t>(k)].real();
    impl_->spectrum[k][1] = in[static_cast<std::size_t>(k)].imag();
  }
  fftw_execute(impl_->inverse);
  const double scale = 1.0 / size_;
  for (int i = 0; i < size_; ++i) out[static_cast<std::size_t>(i)] = impl_->real[i] * scale;
}

Eigen::Index frame_count(std::size_t length) {
  if (length < static_cast<std::size_t>(kWinSize)) return 0;
  return static_cast<Eigen::Index>((length - kWinSize) / kHopSize + 1);
}

std::vector<double> hann_window(int size) {
  std::vector<double> w(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / size);
  return w;
}

ComplexFrames stft(std::span<const double> samples, int threads) {
  const Eigen::Index frames = frame_count(samples.size());
  ComplexFrames out(frames, kSpectrumBins);
  const std::vector<double> window = hann_window(kWinSize);
  parallel_for(static_cast<std::size_t>(frames), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    RealFft fft(kFftSize);
    std::vector<double> buf(kFftSize);
    std::vector<std::complex<double>> spec(kSpectrumBins);
    for (std::size_t f = begin; f < end; ++f) {
      const double* src = samples.data() + f * kHopSize;
      for (int i = 0; i < kWinSize; ++i) buf[static_cast<std::size_t>(i)] = src[i] * window[static_cast<std::size_t>(i)];
      fft.forward(buf, spec);
      for (int k = 0; k < kSpectrumBins; ++k) out(static_cast<Eigen::Index>(f), k) = spec[static_cast<std::size_t>(k)];
    }
  });
  return out;
}

std::vector<double> istft(const ComplexFrames& spectra, int threads) {
  const Eigen::Index frames = spectra.rows();
  if (frames == 0) return {};
  const std::vector<double> window = hann_window(kWinSize);
  Tensor frame_signals(frames, kWinSize);
  parallel_for(static_cast<std::size_t>(frames), threads, [&](std::size_t begin, std::size_t end, std::size_t) {
    RealFft fft(kFftSize);
    std::vector<std::complex<double>> spec(kSpectrumBins);
    std::vector<double> buf(kFftSize);
    for (std::size_t f = begin; f < end; ++f) {
      for (int k = 0; k < kSpectrumBins; ++k) spec[static_cast<std::size_t>(k)] = spectra(static_cast<Eigen::Index>(f), k);
      fft.inverse(spec, buf);
      for (int i = 0; i < kWinSize; ++i)
        frame_signals(static_cast<Eigen::Index>(f), i) = buf[static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
    }
  });
  const std::size_t length = static_cast<std::size_t>((frames - 1) * kHopSize + kWinSize);
  std::vector<double> out(length, 0.0), norm(length, 0.0);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const std::size_t at = static_cast<std::size_t>(f * kHopSize);
    for (int i = 0; i < kWinSize; ++i) {
      out[at + static_cast<std::size_t>(i)] += frame_signals(f, i);
      norm[at + static_cast<std::size_t>(i)] += window[static_cast<std::size_t>(i)] * window[static_cast<std::size_t>(i)];
    }
  }
  for (std::size_t i = 0; i < length; ++i) out[i] = norm[i] > 1e-12 ? out[i] / norm[i] : 0.0;
  return out;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_band_centers() {
  const double top = hz_to_mel(kMelMaxHz);
  std::vector<double> centers(kMelBands);
  for (int b = 0; b < kMelBands; ++b) centers[static_cast<std::size_t>(b)] = mel_to_hz(top * (b + 1) / (kMelBands + 1));
  return centers;
}

namespace {

// Integral of the unit-height triangle (lo, peak, hi) over [a, b].
double triangle_integral(double lo, double peak, double hi, double a, double b) {
  auto primitive = [&](double x) {
    // Antiderivative of the triangle, continuous and constant outside [lo, hi].
    if (x <= lo) return 0.0;
    if (x <= peak) return (x - lo) * (x - lo) / (2.0 * (peak - lo));
    const double left_area = (peak - lo) / 2.0;
    if (x <= hi) return left_area + ((hi - peak) * (hi - peak) - (hi - x) * (hi - x)) / (2.0 * (hi - peak));
    return left_area + (hi - peak) / 2.0;
  };
  return primitive(b) - primitive(a);
}

Eigen::MatrixXd build_filterbank() {
  const double top = hz_to_mel(kMelMaxHz);
  std::vector<double> edges(kMelBands + 2);
  for (int i = 0; i < kMelBands + 2; ++i) edges[static_cast<std::size_t>(i)] = mel_to_hz(top * i / (kMelBands + 1));
  const double bin_hz = static_cast<double>(kModelRate) / kFftSize;
  Eigen::MatrixXd fb = Eigen::MatrixXd::Zero(kMelBands, kSpectrumBins);
  for (int b = 0; b < kMelBands; ++b) {
    const double lo = edges[static_cast<std::size_t>(b)];
    const double peak = edges[static_cast<std::size_t>(b) + 1];
    const double hi = edges[static_cast<std::size_t>(b) + 2];
    for (int k = 0; k < kSpectrumBins; ++k) {
      const double a = std::max(0.0, (k - 0.5) * bin_hz);
      const double c = (k + 0.5) * bin_hz;
      fb(b, k) = triangle_integral(lo, peak, hi, a, c);
    }
    const double area = fb.row(b).sum();
    if (area > 0) fb.row(b) /= area;
  }
  return fb;
}

const Eigen::MatrixXd& filterbank_pinv() {
  static const Eigen::MatrixXd pinv = [] {
    const Eigen::MatrixXd& fb = mel_filterbank();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(fb, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double tol = 1e-10 * sv(0);
    Eigen::VectorXd inv = sv.unaryExpr([tol](double v) { return v > tol ? 1.0 / v : 0.0; });
    return Eigen::MatrixXd(svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose());
  }();
  return pinv;
}

Tensor magnitude_of(const ComplexFrames& spectra) { return spectra.cwiseAbs(); }

}  // namespace

const Eigen::MatrixXd& mel_filterbank() {
  static const Eigen::MatrixXd fb = build_filterbank();
  return fb;
}

MelSpectrogram mel_from_magnitude(const Tensor& magnitude) {
  if (magnitude.cols() != kSpectrumBins) throw Error(Errc::kShapeMismatch, "magnitude must have 257 bins");
  MelSpectrogram mel;
  mel.frames = (magnitude * mel_filterbank().transpose()).unaryExpr([](double v) {
    return std::log(std::max(v, kLogFloor));
  });
  return mel;
}

MelSpectrogram mel_spectrogram(const AudioClip& clip, int threads) {
  if (clip.rate != kModelRate)
    throw Error(Errc::kInvalidRate, "mel extraction expects " + std::to_string(kModelRate) + " Hz, got " +
                                        std::to_string(clip.rate));
  if (clip.samples.size() < static_cast<std::size_t>(kWinSize))
    throw Error(Errc::kClipTooShort, "clip has " + std::to_string(clip.samples.size()) + " samples, need >= 512");
  return mel_from_magnitude(magnitude_of(stft(clip.samples, threads)));
}

double spectral_mismatch(const ComplexFrames& spectra, const Tensor& target) {
  double acc = 0.0;
  for (Eigen::Index f = 0; f < spectra.rows(); ++f) {
    for (Eigen::Index k = 0; k < spectra.cols(); ++k) {
      const double d = std::abs(spectra(f, k)) - target(f, k);
      const double w = (k == 0 || k == spectra.cols() - 1) ? 1.0 : 2.0;
      acc += w * d * d;
    }
  }
  return std::sqrt(acc);
}

GriffinLimResult griffin_lim(const MelSpectrogram& mel, int iters, std::uint64_t seed, int threads) {
  if (iters < 0) throw Error(Errc::kInvalidArgument, "iteration count must be >= 0");
  if (mel.frames.cols() != kMelBands) throw Error(Errc::kShapeMismatch, "mel must have 80 bands");
  const Eigen::Index frames = mel.frames.rows();
  GriffinLimResult result;
  result.clip.rate = mel.rate;
  if (frames == 0) return result;

  const Tensor linear_mel = mel.frames.array().exp().matrix();
  const Tensor target = (linear_mel * filterbank_pinv().transpose()).cwiseMax(0.0);

  CounterRng rng(seed, 0x6121);
  ComplexFrames estimate(frames, kSpectrumBins);
  for (Eigen::Index f = 0; f < frames; ++f) {
    for (Eigen::Index k = 0; k < kSpectrumBins; ++k) {
      // DC and Nyquist bins of a real frame are real.
      const double phase = (k == 0 || k == kSpectrumBins - 1) ? 0.0 : 2.0 * std::numbers::pi * rng.uniform();
      estimate(f, k) = std::polar(target(f, k), phase);
    }
  }
  std::vector<double> signal = istft(estimate, threads);
  ComplexFrames analysed = stft(signal, threads);
  result.mismatch.push_back(spectral_mismatch(analysed, target));
  for (int it = 0; it < iters; ++it) {
    for (Eigen::Index f = 0; f < frames; ++f) {
      for (Eigen::Index k = 0; k < kSpectrumBins; ++k) {
        const std::complex<double> z = analysed(f, k);
        const double mag = std::abs(z);
        estimate(f, k) = mag > 1e-300 ? target(f, k) * (z / mag) : std::complex<double>(target(f, k), 0.0);
      }
    }
    signal = istft(estimate, threads);
    analysed = stft(signal, threads);
    result.mismatch.push_back(spectral_mismatch(analysed, target));
  }
  result.clip.samples = std::move(signal);
  return result;
}

Tensor mel_cepstrum(const Tensor& log_mel, int first, int count) {
  const Eigen::Index bands = log_mel.cols();
  Eigen::MatrixXd basis(bands, count);
  for (int c = 0; c < count; ++c)
    for (Eigen::Index m = 0; m < bands; ++m)
      basis(m, c) = std::sqrt(2.0 / bands) * std::cos(std::numbers::pi * (first + c) * (m + 0.5) / bands);
  return log_mel * basis;
}

}  // namespace svcdiff
