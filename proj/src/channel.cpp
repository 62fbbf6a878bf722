#include "airfl/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace airfl {

void SystemConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("SystemConfig: ") + what); };
  if (num_targets < 1) fail("K must be >= 1");
  if (ris_elements < 1) fail("N must be >= 1");
  if (!(target_power_w > 0.0)) fail("target power must be positive");
  if (!(interferer_power_w > 0.0)) fail("interferer power must be positive");
  if (!(noise_psd_w_per_hz >= 0.0)) fail("noise PSD must be non-negative");
  if (!(bandwidth_hz > 0.0)) fail("bandwidth must be positive");
  if (!(gradient_bound > 0.0)) fail("gradient bound G must be positive");
  if (!(pathloss_exponent >= 0.0)) fail("path-loss exponent must be non-negative");
  if (!(ps_ris_distance_m >= 1.0)) fail("PS-RIS distance must be >= 1 m");
  if (!(device_disk_radius_m >= 0.0)) fail("disk radius must be non-negative");
  if (!(reference_gain > 0.0)) fail("reference gain must be positive");
}

double amplitude_path_gain(double distance, double exponent, double reference_gain) {
  if (!(distance >= 1.0)) throw std::invalid_argument("amplitude_path_gain: distance must be >= 1 m");
  return reference_gain * std::pow(distance, -0.5 * exponent);
}

std::vector<double> draw_device_distances(const SystemConfig& config, RngStream& stream) {
  std::vector<double> d;
  d.reserve(config.num_devices());
  // Per-device substreams so that growing K or M keeps existing positions.
  for (std::size_t i = 0; i < config.num_devices(); ++i) {
    const bool target = i < config.num_targets;
    RngStream s = stream.child(target ? "target" : "interferer", target ? i : i - config.num_targets);
    const double r = config.device_disk_radius_m * std::sqrt(s.uniform());
    d.push_back(std::max(r, 1.0));
  }
  return d;
}

std::vector<double> betas_from_distances(const SystemConfig& config, std::span<const double> distances) {
  const double ps_link =
      amplitude_path_gain(config.ps_ris_distance_m, config.pathloss_exponent, config.reference_gain);
  std::vector<double> beta;
  beta.reserve(distances.size());
  for (double d : distances) {
    beta.push_back(ps_link * amplitude_path_gain(std::max(d, 1.0), config.pathloss_exponent,
                                                 config.reference_gain));
  }
  return beta;
}

std::vector<double> draw_geometry(const SystemConfig& config, RngStream& stream) {
  const auto d = draw_device_distances(config, stream);
  return betas_from_distances(config, d);
}

ChannelRealization draw_realization(const SystemConfig& config, std::span<const double> betas,
                                    RngStream& stream) {
  if (betas.size() != config.num_devices()) {
    throw std::invalid_argument("draw_realization: need one beta per device");
  }
  ChannelRealization r;
  const std::size_t n = config.ris_elements;
  r.h_p = draw_complex_gaussian(n, stream);
  r.h_r.reserve(betas.size());
  for (std::size_t i = 0; i < betas.size(); ++i) r.h_r.push_back(draw_complex_gaussian(n, stream));
  r.beta.assign(betas.begin(), betas.end());
  return r;
}

Complex cascade_sum(std::span<const Complex> h_p, const RisPhases& phases, std::span<const Complex> h_r) {
  if (h_p.size() != phases.size() || h_r.size() != phases.size()) {
    throw std::invalid_argument("cascade_sum: length mismatch");
  }
  const auto& refl = phases.reflection();
  double re = 0.0, im = 0.0;
  for (std::size_t n = 0; n < h_p.size(); ++n) {
    const Complex t = std::conj(h_p[n]) * refl[n] * h_r[n];
    re += t.real();
    im += t.imag();
  }
  return {re, im};
}

double effective_coefficient(std::span<const Complex> h_p, const RisPhases& phases,
                             std::span<const Complex> h_r) {
  return cascade_sum(h_p, phases, h_r).real();
}

double aggregation_coefficient(double beta, double power, double lambda, double u) {
  if (!(lambda > 0.0)) throw std::invalid_argument("aggregation_coefficient: lambda must be positive");
  if (power < 0.0) throw std::invalid_argument("aggregation_coefficient: power must be non-negative");
  return beta * std::sqrt(power) * u / lambda;
}

}  // namespace airfl
