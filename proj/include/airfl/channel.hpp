#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "airfl/ris.hpp"
#include "airfl/rng.hpp"

namespace airfl {

inline double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }
inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

// Scenario constants. Device indices run over targets first, then interferers.
struct SystemConfig {
  std::size_t num_targets = 20;        // K
  std::size_t num_interferers = 10;    // M
  std::size_t ris_elements = 256;      // N
  double target_power_w = 1e-3;        // P_k, 0 dBm
  double interferer_power_w = 1e-3;    // P_m, 0 dBm
  double noise_psd_w_per_hz = 1e-17;   // -140 dBm/Hz
  double bandwidth_hz = 1e6;
  double gradient_bound = 1.0;         // G
  double pathloss_exponent = 2.2;
  double ps_ris_distance_m = 200.0;
  double device_disk_radius_m = 300.0;
  double reference_gain = 1.0;         // amplitude gain of one link at 1 m
  std::uint64_t seed = 1;

  [[nodiscard]] std::size_t num_devices() const { return num_targets + num_interferers; }
  // sigma^2; always derived from the spectral density and bandwidth.
  [[nodiscard]] double noise_variance() const { return noise_psd_w_per_hz * bandwidth_hz; }
  // Throws std::invalid_argument on the first violated constraint.
  void validate() const;
};

// One block-fading draw of the small-scale channels plus the large-scale
// amplitudes they ride on.
struct ChannelRealization {
  ComplexVector h_p;               // RIS -> PS
  std::vector<ComplexVector> h_r;  // device -> RIS, K targets then M interferers
  std::vector<double> beta;        // equivalent large-scale amplitude per device

  [[nodiscard]] std::size_t ris_elements() const { return h_p.size(); }
};

// reference_gain * distance^(-exponent / 2). Distances below 1 m are rejected.
double amplitude_path_gain(double distance, double exponent, double reference_gain);

// Device-to-RIS distances, uniform over the disk, clamped to at least 1 m.
std::vector<double> draw_device_distances(const SystemConfig& config, RngStream& stream);

// Cascaded large-scale amplitude for every device (PS-RIS gain times
// device-RIS gain).
std::vector<double> draw_geometry(const SystemConfig& config, RngStream& stream);
std::vector<double> betas_from_distances(const SystemConfig& config, std::span<const double> distances);

ChannelRealization draw_realization(const SystemConfig& config, std::span<const double> betas,
                                    RngStream& stream);

// Complex cascade sum_n conj(h_p,n) e^{j theta_n} h_r,n.
Complex cascade_sum(std::span<const Complex> h_p, const RisPhases& phases, std::span<const Complex> h_r);

// Real part of the cascade sum (u).
double effective_coefficient(std::span<const Complex> h_p, const RisPhases& phases,
                             std::span<const Complex> h_r);

// beta * sqrt(power) * u / lambda.
double aggregation_coefficient(double beta, double power, double lambda, double u);

}  // namespace airfl
