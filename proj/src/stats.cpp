#include "airfl/stats.hpp"

#include <cmath>
#include <stdexcept>

namespace airfl::stats {

double correlated_ratio_moment(double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw std::invalid_argument("correlated_ratio_moment: rho must lie in [0, 1]");
  }
  return 0.5 * std::sqrt(kPi) * (2.0 - rho);
}

double uniform_sum_pdf(double z) {
  const double norm = 4.0 * kPi * kPi;
  if (z >= 0.0 && z < kTwoPi) return z / norm;
  if (z >= kTwoPi && z <= 2.0 * kTwoPi) return (2.0 * kTwoPi - z) / norm;
  return 0.0;
}

double uniform_diff_pdf(double z) {
  const double norm = 4.0 * kPi * kPi;
  if (z >= -kTwoPi && z < 0.0) return (kTwoPi + z) / norm;
  if (z >= 0.0 && z <= kTwoPi) return (kTwoPi - z) / norm;
  return 0.0;
}

double min_exponential_rate(double rate1, double rate2) {
  if (!(rate1 > 0.0) || !(rate2 > 0.0)) {
    throw std::invalid_argument("min_exponential_rate: rates must be positive");
  }
  return rate1 + rate2;
}

double wrap_angle(double theta) {
  double r = std::fmod(theta, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  // fmod of a tiny negative value can round up to exactly 2pi.
  if (r >= kTwoPi) r = 0.0;
  return r;
}

}  // namespace airfl::stats
