#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "airfl/channel.hpp"
#include "airfl/ris.hpp"

namespace airfl {

enum class SchemeId { SchemeI, SchemeII, BEV, BEVminMSE };

std::string_view to_string(SchemeId id);

// Transmit amplitudes, surface weights and receive scaling for one round.
struct SchemeParams {
  SchemeId scheme_id = SchemeId::SchemeI;
  std::vector<double> sqrt_p;             // per target, sqrt(watts) per unit gradient
  std::vector<double> w;                  // surface weight per target
  double lambda = 1.0;                    // denoising factor
  std::vector<double> interferer_sqrt_p;  // worst case sqrt(P_m)
};

// alpha_i = beta_i sqrt(P_i) for every device (targets then interferers).
std::vector<double> alphas(const SystemConfig& config, std::span<const double> beta);

// Large-scale inversion through power control, equal surface weights.
SchemeParams scheme1_params(const SystemConfig& config, std::span<const double> beta);

// Full power, large-scale inversion through the surface weights.
SchemeParams scheme2_params(const SystemConfig& config, std::span<const double> beta);

// Phase policy a full-power baseline is paired with.
enum class PhasePolicy { Aligned, Random, RoundRobin };

enum class LambdaRule {
  // Average aggregation gain (1/K) sum_k E[l_k] equals 1/K under the paired
  // phase policy. Random phases have zero mean gain, so there the rule matches
  // the mean square gain (1/K) sum_k E[l_k^2] = 1/K^2 instead.
  MatchMean,
  Fixed,
};

// Full-power ("best effort voting") transmission. `round` selects the
// scheduled device for round-robin alignment; `fixed_lambda` is used by
// LambdaRule::Fixed.
SchemeParams bev_params(const SystemConfig& config, std::span<const double> beta, LambdaRule rule,
                        PhasePolicy policy, std::size_t round = 0, double fixed_lambda = 1.0);

// Denoising factor minimizing the MSE conditioned on one realization and
// phase set. Gradients are modelled as uncorrelated with power `grad_power`
// each, interferers transmit unit-norm signals at full power, and noise adds
// sigma^2 D / (2 lambda^2). With a_k = beta_k sqrt(p_k) u_k and
// b_m = beta_m sqrt(P_m) u_m, the MSE in x = 1/lambda is
//   grad_power * sum_k (a_k x - 1/K)^2 + x^2 (sum_m b_m^2 + sigma^2 D / 2),
// minimized at x* = (grad_power / K) sum_k a_k / (grad_power sum_k a_k^2 + sum_m b_m^2 + sigma^2 D / 2).
// Returns 1 when every target coefficient is zero and +infinity when x* <= 0
// (the zero estimator is then optimal).
double min_mse_denoiser(const SystemConfig& config, const ChannelRealization& realization,
                        const RisPhases& phases, std::span<const double> sqrt_p, double grad_power,
                        std::size_t dimension);

}  // namespace airfl
