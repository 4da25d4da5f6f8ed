// SPDX-License-Identifier: Apache-2.0
#include "svcdiff/conditioning.hpp"

#include <cmath>
#include <string>

#include "svcdiff/error.hpp"
#include "svcdiff/rng.hpp"

namespace svcdiff {

Tensor content_features(const MelSpectrogram& mel) {
  Tensor cep = mel_cepstrum(mel.frames, 1, kContentDim);
  const Eigen::Index n = cep.rows();
  if (n == 0) return cep;
  for (Eigen::Index c = 0; c < cep.cols(); ++c) {
    const double m = cep.col(c).mean();
    cep.col(c).array() -= m;
    const double var = cep.col(c).squaredNorm() / static_cast<double>(n);
    const double sd = std::sqrt(var);
    // Relative test keeps floating-point dust on constant columns at zero.
    if (sd > 1e-9 * (1.0 + std::abs(m)))
      cep.col(c) /= sd;
    else
      cep.col(c).setZero();
  }
  return cep;
}

ConditioningTrack build_conditioning(const F0Contour& f0, const Tensor& content, std::uint64_t seed) {
  if (static_cast<Eigen::Index>(f0.size()) != content.rows())
    throw Error(Errc::kFrameCountMismatch, "F0 has " + std::to_string(f0.size()) + " frames, content has " +
                                               std::to_string(content.rows()));
  const Eigen::Index in_dim = 2 + content.cols();
  Tensor features(content.rows(), in_dim);
  for (Eigen::Index f = 0; f < content.rows(); ++f) {
    features(f, 0) = std::log1p(f0.hz[static_cast<std::size_t>(f)]);
    features(f, 1) = f0.voiced[static_cast<std::size_t>(f)] ? 1.0 : 0.0;
    features.row(f).tail(content.cols()) = content.row(f);
  }
  CounterRng rng(seed, static_cast<std::uint64_t>(in_dim));
  Tensor projection = rng.normal_tensor(in_dim, kConditioningDim) / std::sqrt(static_cast<double>(in_dim));
  return {features * projection};
}

}  // namespace svcdiff
