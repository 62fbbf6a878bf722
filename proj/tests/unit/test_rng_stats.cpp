#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "airfl/rng.hpp"
#include "airfl/stats.hpp"

using namespace airfl;
using stats::kPi;

namespace {

struct Moments {
  double mean = 0, var = 0, se = 0;
};

template <typename F>
Moments sample(std::size_t n, F&& draw) {
  double s = 0, s2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = draw();
    s += x;
    s2 += x * x;
  }
  Moments m;
  m.mean = s / n;
  m.var = (s2 - n * m.mean * m.mean) / (n - 1);
  m.se = std::sqrt(m.var / n);
  return m;
}

}  // namespace

TEST(DeriveStream, EqualArgumentsGiveEqualSequences) {
  auto a = derive_stream(7, {{"chan", 0}});
  auto b = derive_stream(7, {{"chan", 0}});
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(DeriveStream, SiblingStreamsAreUncorrelated) {
  auto a = derive_stream(7, {{"chan", 0}});
  auto b = derive_stream(7, {{"chan", 1}});
  const int n = 100000;
  double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal(), y = b.normal();
    sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double r = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_NEAR(r, 0.0, 0.01);
}

TEST(DeriveStream, SeedsDiffer) {
  auto a = derive_stream(7, {{"chan", 0}});
  auto b = derive_stream(8, {{"chan", 0}});
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(DeriveStream, PathIsOrderSensitiveAndChildMatches) {
  auto ab = derive_stream(3, {{"a", 0}, {"b", 1}});
  auto ba = derive_stream(3, {{"b", 1}, {"a", 0}});
  EXPECT_NE(ab.key(), ba.key());
  auto via_child = derive_stream(3, {{"a", 0}}).child("b", 1);
  EXPECT_EQ(ab.key(), via_child.key());
}

TEST(RngStream, ChildDoesNotAdvanceParentAndCopiesKeepPosition) {
  auto s = derive_stream(1, {{"x", 0}});
  s.next_u64();
  auto copy = s;
  (void)s.child("c", 4);
  EXPECT_EQ(s.next_u64(), copy.next_u64());
}

TEST(RngStream, UniformAndBelowRanges) {
  auto s = derive_stream(11, {});
  for (int i = 0; i < 10000; ++i) {
    const double u = s.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ASSERT_LT(s.below(7), 7u);
  }
}

TEST(RngStream, ExponentialMean) {
  auto s = derive_stream(5, {});
  const auto m = sample(200000, [&] { return s.exponential(4.0); });
  EXPECT_NEAR(m.mean, 0.25, 3 * m.se);
}

TEST(ComplexGaussian, RejectsEmpty) {
  auto s = derive_stream(1, {});
  EXPECT_THROW(draw_complex_gaussian(0, s), std::invalid_argument);
}

TEST(ComplexGaussian, UnitPowerAndRayleighMagnitude) {
  auto s = derive_stream(2, {{"cn", 0}});
  const auto h = draw_complex_gaussian(1000000, s);
  double p = 0, re = 0, mag = 0, re2 = 0, im2 = 0, im = 0;
  for (const auto& z : h) {
    p += std::norm(z);
    re += z.real();
    im += z.imag();
    re2 += z.real() * z.real();
    im2 += z.imag() * z.imag();
    mag += std::abs(z);
  }
  const double n = static_cast<double>(h.size());
  EXPECT_NEAR(p / n, 1.0, 0.01);
  EXPECT_NEAR(re / n, 0.0, 0.005);
  EXPECT_NEAR(mag / n, std::sqrt(kPi) / 2, 0.005 * std::sqrt(kPi) / 2);
  EXPECT_NEAR(re2 / n - (re / n) * (re / n), 0.5, 0.005);
  EXPECT_NEAR(im2 / n - (im / n) * (im / n), 0.5, 0.005);
}

TEST(CorrelatedRatio, ClosedFormValues) {
  EXPECT_NEAR(stats::correlated_ratio_moment(1.0), 0.88623, 1e-5);
  EXPECT_NEAR(stats::correlated_ratio_moment(0.0), 1.77245, 1e-5);
  EXPECT_NEAR(stats::correlated_ratio_moment(0.5), 1.32934, 1e-5);
  EXPECT_THROW(stats::correlated_ratio_moment(-0.1), std::invalid_argument);
  EXPECT_THROW(stats::correlated_ratio_moment(1.1), std::invalid_argument);
}

// x = |a|, y = |sqrt(c) a + sqrt(1 - c) b| gives rho = c; the realized rho is
// measured and fed to the closed form.
TEST(CorrelatedRatio, MonteCarloAtHalfCorrelation) {
  auto s = derive_stream(9, {{"ratio", 0}});
  const double c = 0.5;
  const int n = 1000000;
  double ratio = 0, x2y2 = 0;
  for (int i = 0; i < n; ++i) {
    const Complex a = s.complex_normal(), b = s.complex_normal();
    const double x = std::abs(a), y = std::abs(std::sqrt(c) * a + std::sqrt(1 - c) * b);
    ratio += x * x / y;
    x2y2 += x * x * y * y;
  }
  const double rho = x2y2 / n - 1.0;
  EXPECT_NEAR(ratio / n, stats::correlated_ratio_moment(std::clamp(rho, 0.0, 1.0)), 0.01 * (ratio / n));
}

TEST(UniformSumPdf, ShapeAndNormalization) {
  EXPECT_NEAR(stats::uniform_sum_pdf(2 * kPi), 1 / (2 * kPi), 1e-12);
  EXPECT_EQ(stats::uniform_sum_pdf(0.0), 0.0);
  EXPECT_EQ(stats::uniform_sum_pdf(-1.0), 0.0);
  EXPECT_EQ(stats::uniform_sum_pdf(4 * kPi + 1), 0.0);
  const int n = 10000;
  const double h = 4 * kPi / n;
  double integral = 0;
  for (int i = 0; i < n; ++i) integral += stats::uniform_sum_pdf((i + 0.5) * h) * h;
  EXPECT_NEAR(integral, 1.0, 1e-6);
}

TEST(UniformDiffPdf, ShapeAndHistogram) {
  EXPECT_NEAR(stats::uniform_diff_pdf(0.0), 1 / (2 * kPi), 1e-12);
  EXPECT_NEAR(stats::uniform_diff_pdf(2 * kPi), 0.0, 1e-15);
  EXPECT_NEAR(stats::uniform_diff_pdf(-2 * kPi), 0.0, 1e-15);

  auto s = derive_stream(4, {{"diff", 0}});
  const int n = 1000000, bins = 20;
  std::vector<int> count(bins, 0);
  const double w = 4 * kPi / bins;
  for (int i = 0; i < n; ++i) {
    const double z = s.uniform(0, 2 * kPi) - s.uniform(0, 2 * kPi);
    ++count[std::min(bins - 1, static_cast<int>((z + 2 * kPi) / w))];
  }
  // Central bins only: the outer ones hold too little mass for a 2% check.
  for (int b = 4; b < bins - 4; ++b) {
    const double lo = -2 * kPi + b * w;
    double p = 0;
    for (int j = 0; j < 100; ++j) p += stats::uniform_diff_pdf(lo + (j + 0.5) * w / 100) * w / 100;
    EXPECT_NEAR(count[b] / double(n), p, 0.02 * p) << "bin " << b;
  }
}

TEST(MinExponential, RateAndSampleMean) {
  EXPECT_EQ(stats::min_exponential_rate(1, 1), 2);
  EXPECT_EQ(stats::min_exponential_rate(2, 3), 5);
  EXPECT_THROW(stats::min_exponential_rate(1, 0), std::invalid_argument);
  EXPECT_THROW(stats::min_exponential_rate(-1, 2), std::invalid_argument);
  auto s = derive_stream(6, {});
  const auto m = sample(1000000, [&] { return std::min(s.exponential(2), s.exponential(3)); });
  EXPECT_NEAR(m.mean, 0.2, 0.01 * 0.2);
}

TEST(WrapAngle, MapsIntoRange) {
  EXPECT_NEAR(stats::wrap_angle(-kPi / 2), 1.5 * kPi, 1e-12);
  EXPECT_NEAR(stats::wrap_angle(5 * kPi), kPi, 1e-12);
  EXPECT_EQ(stats::wrap_angle(0.0), 0.0);
  EXPECT_LT(stats::wrap_angle(2 * kPi), 2 * kPi);
  EXPECT_EQ(stats::phase_of(Complex(0, 0)), 0.0);
  EXPECT_NEAR(stats::phase_of(Complex(0, -1)), 1.5 * kPi, 1e-12);
}
