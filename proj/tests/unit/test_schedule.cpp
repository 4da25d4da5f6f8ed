// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "svcdiff/error.hpp"
#include "svcdiff/rng.hpp"
#include "svcdiff/sampler.hpp"
#include "svcdiff/schedule.hpp"
#include "svcdiff/stats.hpp"
#include "test_support.hpp"

namespace svcdiff {
namespace {

using std::numbers::pi;

const NoiseSchedule kCos = make_schedule(ScheduleKind::kVpCosine);

TEST(Schedule, CosineEndpointsAndSymmetry) {
  const Coeffs c0 = kCos.coeffs(0.0);
  EXPECT_EQ(c0.signal, 1.0);
  EXPECT_EQ(c0.noise, 0.0);
  const Coeffs half = kCos.coeffs(0.5);
  EXPECT_NEAR(half.signal, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(half.noise, std::sqrt(0.5), 1e-15);
}

TEST(Schedule, CosineCoefficientsMatchReference) {
  // mpmath, 30 digits
  const Coeffs c = kCos.coeffs(0.1);
  EXPECT_NEAR(c.signal, 0.98768834059513772619, 1e-15);
  EXPECT_NEAR(c.noise, 0.15643446504023086901, 1e-15);
}

TEST(Schedule, LogSnrReference) {
  EXPECT_NEAR(kCos.log_snr(0.5), 0.0, 1e-14);
  EXPECT_NEAR(kCos.log_snr(0.1), 3.685460069402226060, 1e-12);
  EXPECT_NEAR(kCos.log_snr(0.1), 2.0 * std::log(1.0 / std::tan(0.05 * pi)), 1e-12);
  EXPECT_ERRC(kCos.log_snr(0.0), Errc::kDivergentSnr);
}

TEST(Schedule, TransitionVarianceReference) {
  EXPECT_EQ(kCos.transition_var(0.4, 0.4), 0.0);
  EXPECT_NEAR(kCos.transition_var(0.0, 1.0), 1.0, 1e-15);
  EXPECT_NEAR(kCos.transition_var(0.3, 0.7), 0.74038381631750027540, 1e-14);
  EXPECT_ERRC(kCos.transition_var(0.7, 0.3), Errc::kTimeOrderViolation);
}

TEST(Schedule, OutOfRangeTime) {
  EXPECT_ERRC(kCos.coeffs(-0.01), Errc::kOutOfRangeTime);
  EXPECT_ERRC(kCos.coeffs(1.01), Errc::kOutOfRangeTime);
  EXPECT_ERRC(kCos.coeffs(std::nan("")), Errc::kOutOfRangeTime);
}

TEST(Schedule, LinearLogSnrIsLinear) {
  const std::vector<double> p{-10.0, 10.0};
  const NoiseSchedule s = make_schedule(ScheduleKind::kVpLinearLogSnr, p);
  EXPECT_NEAR(s.log_snr(0.25), 5.0, 1e-9);
  EXPECT_NEAR(s.log_snr(0.5), 0.0, 1e-9);
  EXPECT_NEAR(s.log_snr(1.0), -10.0, 1e-9);
  EXPECT_NEAR(s.log_snr(0.0), 10.0, 1e-9);
  // Default endpoints match.
  const NoiseSchedule d = make_schedule(ScheduleKind::kVpLinearLogSnr);
  EXPECT_NEAR(d.log_snr(0.3), s.log_snr(0.3), 1e-15);
}

TEST(Schedule, InvalidParams) {
  const std::vector<double> reversed{5.0, -5.0};
  EXPECT_ERRC(make_schedule(ScheduleKind::kVpLinearLogSnr, reversed), Errc::kInvalidScheduleParams);
  const std::vector<double> inf{-INFINITY, 3.0};
  EXPECT_ERRC(make_schedule(ScheduleKind::kVpLinearLogSnr, inf), Errc::kInvalidScheduleParams);
  const std::vector<double> one{1.0};
  EXPECT_ERRC(make_schedule(ScheduleKind::kVpLinearLogSnr, one), Errc::kInvalidScheduleParams);
  EXPECT_ERRC(make_schedule(ScheduleKind::kVpCosine, one), Errc::kInvalidScheduleParams);
}

TEST(Schedule, ParseKinds) {
  EXPECT_EQ(parse_schedule_kind("vp-cosine"), ScheduleKind::kVpCosine);
  EXPECT_EQ(parse_schedule_kind("vp-linear-logsnr"), ScheduleKind::kVpLinearLogSnr);
  EXPECT_EQ(to_string(ScheduleKind::kVpLinearLogSnr), "vp-linear-logsnr");
  EXPECT_ERRC(parse_schedule_kind("sigmoid"), Errc::kInvalidScheduleParams);
}

class ScheduleProperties : public ::testing::TestWithParam<ScheduleKind> {};

TEST_P(ScheduleProperties, VpIdentityAndRanges) {
  const NoiseSchedule s = make_schedule(GetParam());
  for (int i = 1; i < 1000; ++i) {
    const double tau = i / 1000.0;
    const Coeffs c = s.coeffs(tau);
    EXPECT_NEAR(c.signal * c.signal + c.noise * c.noise, 1.0, 1e-12);
    EXPECT_GT(c.signal, 0.0);
    EXPECT_LT(c.signal, 1.0);
    EXPECT_GT(c.noise, 0.0);
    EXPECT_LT(c.noise, 1.0);
    EXPECT_NEAR(s.log_snr(tau), 2.0 * (std::log(c.signal) - std::log(c.noise)), 1e-9);
  }
}

TEST_P(ScheduleProperties, LogSnrStrictlyDecreasing) {
  const NoiseSchedule s = make_schedule(GetParam());
  double prev = s.log_snr(0.001);
  for (int i = 2; i < 1000; ++i) {
    const double cur = s.log_snr(i / 1000.0);
    EXPECT_LT(cur, prev) << "tau=" << i / 1000.0;
    prev = cur;
  }
}

TEST_P(ScheduleProperties, TransitionVarianceNonNegativeOnRandomPairs) {
  const NoiseSchedule s = make_schedule(GetParam());
  CounterRng rng(11);
  for (int i = 0; i < 5000; ++i) {
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    // Also probe nearly coincident times, where cancellation bites.
    if (i % 3 == 0) b = std::min(1.0, a + 1e-12 * rng.uniform());
    const double v = s.transition_var(a, b);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST_P(ScheduleProperties, MarkovCompositionMonteCarlo) {
  const NoiseSchedule s = make_schedule(GetParam());
  constexpr int n = 100000;
  const double x = 0.7, rho = 0.35, tau = 0.8;
  CounterRng r1(5, 1), r2(5, 2);
  Tensor a = r1.normal_tensor(n, 1), b = r2.normal_tensor(n, 1);
  Tensor xs = Tensor::Constant(n, 1, x);
  const LatentState y_rho = forward_marginal(s, {xs}, rho, a);
  const LatentState y_tau = forward_transition(s, y_rho, tau, b);
  std::vector<double> v(y_tau.values.data(), y_tau.values.data() + n);
  const Coeffs c = s.coeffs(tau);
  const double m = mean(v);
  const double sd = stddev(v);
  const double want_var = c.noise * c.noise;
  EXPECT_NEAR(m, c.signal * x, 3.0 * c.noise / std::sqrt(n));
  // Var of the sample variance for Gaussian data is 2 sigma^4 / (n - 1).
  EXPECT_NEAR(sd * sd, want_var, 3.0 * want_var * std::sqrt(2.0 / (n - 1)));
}

INSTANTIATE_TEST_SUITE_P(Kinds, ScheduleProperties,
                         ::testing::Values(ScheduleKind::kVpCosine, ScheduleKind::kVpLinearLogSnr));

}  // namespace
}  // namespace svcdiff
