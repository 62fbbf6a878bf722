#include "airfl/ris.hpp"

#include <cmath>
#include <stdexcept>

#include "airfl/stats.hpp"

namespace airfl {
namespace {

Complex unit(Complex z) {
  const double mag = std::abs(z);
  if (mag == 0.0) return {1.0, 0.0};
  return z / mag;
}

ComplexVector reflection_of(const std::vector<double>& theta) {
  ComplexVector r(theta.size());
  for (std::size_t n = 0; n < theta.size(); ++n) r[n] = {std::cos(theta[n]), std::sin(theta[n])};
  return r;
}

}  // namespace

RisPhases::RisPhases(std::vector<double> theta) : theta_(std::move(theta)) {
  for (auto& t : theta_) t = stats::wrap_angle(t);
  reflection_ = reflection_of(theta_);
}

RisPhases RisPhases::from_directions(std::span<const Complex> directions) {
  RisPhases p;
  p.theta_.resize(directions.size());
  p.reflection_.resize(directions.size());
  for (std::size_t n = 0; n < directions.size(); ++n) {
    p.reflection_[n] = unit(directions[n]);
    p.theta_[n] = stats::phase_of(p.reflection_[n]);
  }
  return p;
}

RisPhases aligned_phases(std::span<const Complex> h_p,
                          std::span<const ComplexVector> h_r_targets,
                          std::span<const double> w) {
  if (h_r_targets.empty() || h_r_targets.size() != w.size()) {
    throw std::invalid_argument("aligned_phases: need one positive weight per target");
  }
  for (double wk : w) {
    if (!(wk > 0.0)) throw std::invalid_argument("aligned_phases: weights must be positive");
  }
  const std::size_t n_elems = h_p.size();
  for (const auto& h : h_r_targets) {
    if (h.size() != n_elems) throw std::invalid_argument("aligned_phases: length mismatch");
  }
  ComplexVector dir(n_elems);
  for (std::size_t n = 0; n < n_elems; ++n) {
    Complex s{0.0, 0.0};
    for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * std::conj(h_r_targets[k][n]);
    // -angle(conj(h_p)) == angle(h_p)
    dir[n] = unit(h_p[n]) * unit(s);
  }
  return RisPhases::from_directions(dir);
}

RisPhases round_robin_phases(std::span<const Complex> h_p, std::span<const Complex> h_r_k) {
  if (h_p.size() != h_r_k.size()) throw std::invalid_argument("round_robin_phases: length mismatch");
  ComplexVector dir(h_p.size());
  for (std::size_t n = 0; n < h_p.size(); ++n) dir[n] = unit(h_p[n]) * unit(std::conj(h_r_k[n]));
  return RisPhases::from_directions(dir);
}

RisPhases random_phases(std::size_t n, RngStream& stream) {
  if (n == 0) throw std::invalid_argument("random_phases: n must be >= 1");
  std::vector<double> theta(n);
  for (auto& t : theta) t = stats::kTwoPi * stream.uniform();
  return RisPhases(std::move(theta));
}

RisPhases quantize_phases(const RisPhases& phases, int bits) {
  if (bits < 1) throw std::invalid_argument("quantize_phases: bits must be >= 1");
  if (bits > 52) return phases;
  const auto levels = static_cast<std::uint64_t>(1) << bits;
  const double step = stats::kTwoPi / static_cast<double>(levels);
  std::vector<double> out(phases.size());
  for (std::size_t n = 0; n < phases.size(); ++n) {
    const double q = phases.theta()[n] / step;
    double f = std::floor(q);
    if (q - f > 0.5) f += 1.0;
    const auto idx = static_cast<std::uint64_t>(f) % levels;
    out[n] = static_cast<double>(idx) * step;
  }
  return RisPhases(std::move(out));
}

RisPhases perturb_phases(const RisPhases& phases, double delta, RngStream& stream) {
  if (delta < 0.0) throw std::invalid_argument("perturb_phases: delta must be >= 0");
  std::vector<double> out = phases.theta();
  for (auto& t : out) t += stream.uniform(-delta, delta);
  return RisPhases(std::move(out));
}

}  // namespace airfl
