#pragma once

#include <complex>

// Closed-form distribution identities used by the coefficient moment
// derivations. Each has a Monte Carlo counterpart in the tests.

namespace airfl::stats {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// E[x^2 / y] for a pair of unit-power (E[x^2] = E[y^2] = 1) Rayleigh variables
// whose squared magnitudes have correlation coefficient rho = E[x^2 y^2] - 1.
// Only rho in [0, 1] is supported; the proofs that use it never leave that range.
double correlated_ratio_moment(double rho);

// Density of x + y with x, y ~ U(0, 2pi) independent.
double uniform_sum_pdf(double z);

// Density of x - y with x, y ~ U(0, 2pi) independent.
double uniform_diff_pdf(double z);

// Rate of min(x, y) for independent x ~ Exp(rate1), y ~ Exp(rate2).
double min_exponential_rate(double rate1, double rate2);

// Maps any angle to [0, 2pi).
double wrap_angle(double theta);

// Angle of z in [0, 2pi); zero for z == 0.
template <typename C>
double phase_of(const C& z) {
  if (z.real() == 0.0 && z.imag() == 0.0) return 0.0;
  return wrap_angle(std::arg(z));
}

}  // namespace airfl::stats
