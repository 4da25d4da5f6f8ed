// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "svcdiff/conditioning.hpp"
#include "svcdiff/error.hpp"
#include "svcdiff/f0.hpp"
#include "svcdiff/rng.hpp"
#include "test_support.hpp"

namespace svcdiff {
namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

TEST(F0, SteadyTone220) {
  const F0Contour c = estimate_f0(testing::sine(220.0, 1.0));
  ASSERT_EQ(static_cast<Eigen::Index>(c.size()), frame_count(40000));
  std::vector<double> voiced_hz;
  for (std::size_t f = 0; f < c.size(); ++f)
    if (c.voiced[f]) voiced_hz.push_back(c.hz[f]);
  EXPECT_GE(static_cast<double>(voiced_hz.size()), 0.95 * c.size());
  const double m = median(voiced_hz);
  EXPECT_GE(m, 215.0);
  EXPECT_LE(m, 225.0);
}

TEST(F0, SilenceIsUnvoiced) {
  const F0Contour c = estimate_f0(testing::silence(0.5));
  for (std::size_t f = 0; f < c.size(); ++f) {
    EXPECT_FALSE(c.voiced[f]);
    EXPECT_EQ(c.hz[f], 0.0);
  }
}

TEST(F0, UnvoicedFramesCarryZero) {
  const F0Contour c = estimate_f0(testing::concat({testing::silence(0.3), testing::sine(300.0, 0.3)}));
  for (std::size_t f = 0; f < c.size(); ++f) {
    if (!c.voiced[f]) EXPECT_EQ(c.hz[f], 0.0);
    else EXPECT_GT(c.hz[f], 0.0);
  }
}

TEST(F0, ChirpTracked) {
  const double sec = 2.0;
  const F0Contour c = estimate_f0(testing::chirp(110.0, 440.0, sec));
  std::size_t checked = 0, within = 0;
  for (std::size_t f = 0; f < c.size(); ++f) {
    const double t = frame_time(static_cast<long>(f));
    if (t < 0.1 || t > sec - 0.1) continue;
    ++checked;
    const double want = testing::chirp_frequency(110.0, 440.0, sec, t);
    if (c.voiced[f] && std::abs(c.hz[f] - want) <= 0.05 * want) ++within;
  }
  ASSERT_GT(checked, 500u);
  EXPECT_GE(static_cast<double>(within), 0.95 * checked);
}

TEST(F0, VibratoFormantVoice) {
  const F0Contour c = estimate_f0(testing::formant_tone(testing::kVowelA, 180.0, 1.0, 0.03, 5.5));
  std::vector<double> hz;
  for (std::size_t f = 0; f < c.size(); ++f)
    if (c.voiced[f]) hz.push_back(c.hz[f]);
  EXPECT_GE(static_cast<double>(hz.size()), 0.9 * c.size());
  EXPECT_NEAR(median(hz), 180.0, 9.0);
}

TEST(F0, ThreadCountDoesNotChangeResult) {
  const AudioClip clip = testing::chirp(150.0, 300.0, 0.5);
  const F0Contour a = estimate_f0(clip, {}, 1);
  const F0Contour b = estimate_f0(clip, {}, 3);
  EXPECT_EQ(a.hz, b.hz);
  EXPECT_EQ(a.voiced, b.voiced);
}

TEST(F0, Errors) {
  EXPECT_ERRC(estimate_f0(AudioClip{std::vector<double>(4000, 0.0), 16000}), Errc::kInvalidRate);
  EXPECT_ERRC(estimate_f0(AudioClip{std::vector<double>(100, 0.0), kModelRate}), Errc::kClipTooShort);
}

TEST(F0, FrameTimeMatchesMelFrames) {
  EXPECT_DOUBLE_EQ(frame_time(0), 256.0 / 40000.0);
  EXPECT_DOUBLE_EQ(frame_time(10), (1280.0 + 256.0) / 40000.0);
}

// ---- content / conditioning ----

TEST(Content, ShapeAndGainInvariance) {
  // A noise bed keeps every band above the log floor, where the invariance
  // is exact.
  AudioClip a = testing::formant_tone(testing::kVowelI, 200.0, 0.5, 0.02);
  CounterRng rng(10);
  for (auto& s : a.samples) s += 1e-2 * rng.normal();
  AudioClip b = a;
  for (auto& s : b.samples) s *= 0.1;
  const Tensor ca = content_features(mel_spectrogram(a));
  const Tensor cb = content_features(mel_spectrogram(b));
  ASSERT_EQ(ca.cols(), kContentDim);
  // A gain is a constant log offset: only c0 moves, and c0 is not kept.
  EXPECT_LT((ca - cb).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Content, ConstantSpectrumGivesZeros) {
  MelSpectrogram m;
  m.frames = Tensor::Constant(12, 80, -3.0);
  EXPECT_EQ(content_features(m), Tensor::Zero(12, kContentDim));
}

TEST(Content, VowelDominatesPitch) {
  const double seg = 0.5;
  const AudioClip clip = testing::concat({testing::formant_tone(testing::kVowelA, 150.0, seg),
                                          testing::formant_tone(testing::kVowelA, 260.0, seg),
                                          testing::formant_tone(testing::kVowelU, 150.0, seg)});
  const Tensor c = content_features(mel_spectrogram(clip));
  const auto mean_over = [&](double t0, double t1) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(c.cols());
    int n = 0;
    for (Eigen::Index f = 0; f < c.rows(); ++f) {
      const double t = frame_time(f);
      if (t >= t0 + 0.05 && t <= t1 - 0.05) {
        acc += c.row(f);
        ++n;
      }
    }
    return Eigen::RowVectorXd(acc / n);
  };
  const auto a_low = mean_over(0.0, seg), a_high = mean_over(seg, 2 * seg), u_low = mean_over(2 * seg, 3 * seg);
  EXPECT_LT((a_low - a_high).norm(), (a_low - u_low).norm());
}

TEST(Conditioning, ShapeDeterminismAndAlignment) {
  const AudioClip clip = testing::sine(300.0, 0.4);
  const MelSpectrogram mel = mel_spectrogram(clip);
  const F0Contour f0 = estimate_f0(clip);
  const Tensor content = content_features(mel);
  const ConditioningTrack a = build_conditioning(f0, content);
  const ConditioningTrack b = build_conditioning(f0, content);
  EXPECT_EQ(a.vectors.rows(), mel.frames.rows());
  EXPECT_EQ(a.vectors.cols(), kConditioningDim);
  EXPECT_EQ(a.vectors, b.vectors);
  EXPECT_NE(build_conditioning(f0, content, kProjectionSeed + 1).vectors, a.vectors);
}

TEST(Conditioning, ZeroInputsGiveZeroVectors) {
  F0Contour f0{std::vector<double>(5, 0.0), std::vector<bool>(5, false)};
  const ConditioningTrack t = build_conditioning(f0, Tensor::Zero(5, kContentDim));
  EXPECT_EQ(t.vectors, Tensor::Zero(5, kConditioningDim));
}

TEST(Conditioning, IsLinearPerFrame) {
  // Row f depends on frame f only.
  CounterRng rng(9);
  F0Contour f0{{100.0, 0.0, 250.0}, {true, false, true}};
  Tensor content = rng.normal_tensor(3, kContentDim);
  const Tensor full = build_conditioning(f0, content).vectors;
  F0Contour one{{250.0}, {true}};
  const Tensor last = build_conditioning(one, content.bottomRows(1)).vectors;
  EXPECT_LT((full.bottomRows(1) - last).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Conditioning, FrameCountMismatch) {
  F0Contour f0{std::vector<double>(4, 0.0), std::vector<bool>(4, false)};
  EXPECT_ERRC(build_conditioning(f0, Tensor::Zero(5, kContentDim)), Errc::kFrameCountMismatch);
}

}  // namespace
}  // namespace svcdiff
