#pragma once

#include <span>
#include <vector>

#include "airfl/rng.hpp"

namespace airfl {

// Phase shifts of an N-element passive surface, each in [0, 2pi). The
// reflection entries e^{j theta_n} are cached alongside the angles.
class RisPhases {
 public:
  RisPhases() = default;
  explicit RisPhases(std::vector<double> theta);
  // Builds phases from complex numbers whose angles are the desired shifts.
  // Zero entries map to angle 0.
  static RisPhases from_directions(std::span<const Complex> directions);

  [[nodiscard]] std::size_t size() const { return theta_.size(); }
  [[nodiscard]] const std::vector<double>& theta() const { return theta_; }
  [[nodiscard]] const ComplexVector& reflection() const { return reflection_; }

 private:
  std::vector<double> theta_;
  ComplexVector reflection_;
};

// theta_n = -angle(conj(h_p,n)) + angle(sum_k w_k conj(h_r,k,n)), wrapped.
RisPhases aligned_phases(std::span<const Complex> h_p,
                          std::span<const ComplexVector> h_r_targets,
                          std::span<const double> w);

// Alignment towards a single scheduled device.
RisPhases round_robin_phases(std::span<const Complex> h_p, std::span<const Complex> h_r_k);

RisPhases random_phases(std::size_t n, RngStream& stream);

// Nearest point of the 2^bits uniform grid; ties go to the smaller grid value.
RisPhases quantize_phases(const RisPhases& phases, int bits);

// Adds i.i.d. U[-delta, delta] phase errors.
RisPhases perturb_phases(const RisPhases& phases, double delta, RngStream& stream);

// Which device round-robin alignment serves in a given round.
inline std::size_t round_robin_device(std::size_t round, std::size_t num_targets) {
  return round % num_targets;
}

}  // namespace airfl
