#include "airfl/aggregator.hpp"

#include <span>
#include <stdexcept>

namespace airfl {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::SchemeI: return "scheme1";
    case Strategy::SchemeII: return "scheme2";
    case Strategy::BevRandom: return "bev_random";
    case Strategy::BevRoundRobin: return "bev_rr";
    case Strategy::BevMinMse: return "bev_minmse";
  }
  return "unknown";
}

std::optional<Strategy> strategy_from_string(std::string_view name) {
  for (auto s : {Strategy::SchemeI, Strategy::SchemeII, Strategy::BevRandom, Strategy::BevRoundRobin,
                 Strategy::BevMinMse}) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

bool has_closed_form(Strategy s) { return s == Strategy::SchemeI || s == Strategy::SchemeII; }

SchemeId scheme_id_of(Strategy s) {
  switch (s) {
    case Strategy::SchemeI: return SchemeId::SchemeI;
    case Strategy::SchemeII: return SchemeId::SchemeII;
    case Strategy::BevMinMse: return SchemeId::BEVminMSE;
    default: return SchemeId::BEV;
  }
}

PhasePolicy phase_policy_of(Strategy s) {
  switch (s) {
    case Strategy::BevRandom: return PhasePolicy::Random;
    case Strategy::BevRoundRobin: return PhasePolicy::RoundRobin;
    default: return PhasePolicy::Aligned;
  }
}

RoundPlan plan_round(Strategy strategy, const SystemConfig& config, const ChannelRealization& realization,
                     const PhaseImpairment& impairment, std::size_t round, double grad_power,
                     std::size_t dimension, RngStream& stream) {
  const std::size_t K = config.num_targets;
  if (realization.h_r.size() != config.num_devices()) {
    throw std::invalid_argument("plan_round: realization does not match config");
  }
  const std::span<const ComplexVector> targets(realization.h_r.data(), K);
  const auto& beta = realization.beta;

  RoundPlan plan;
  switch (strategy) {
    case Strategy::SchemeI:
      plan.params = scheme1_params(config, beta);
      plan.phases = aligned_phases(realization.h_p, targets, plan.params.w);
      break;
    case Strategy::SchemeII:
      plan.params = scheme2_params(config, beta);
      plan.phases = aligned_phases(realization.h_p, targets, plan.params.w);
      break;
    case Strategy::BevRandom:
      plan.params = bev_params(config, beta, LambdaRule::MatchMean, PhasePolicy::Random, round);
      plan.phases = random_phases(config.ris_elements, stream);
      break;
    case Strategy::BevRoundRobin: {
      plan.params = bev_params(config, beta, LambdaRule::MatchMean, PhasePolicy::RoundRobin, round);
      const std::size_t j = round_robin_device(round, K);
      plan.phases = round_robin_phases(realization.h_p, realization.h_r[j]);
      break;
    }
    case Strategy::BevMinMse:
      plan.params = bev_params(config, beta, LambdaRule::MatchMean, PhasePolicy::Aligned, round);
      plan.params.scheme_id = SchemeId::BEVminMSE;
      plan.phases = aligned_phases(realization.h_p, targets, plan.params.w);
      break;
  }

  if (impairment.quantization_bits > 0) plan.phases = quantize_phases(plan.phases, impairment.quantization_bits);
  // The receiver knows the quantized phases it configured but not the random
  // phase errors on top of them.
  if (strategy == Strategy::BevMinMse) {
    plan.params.lambda =
        min_mse_denoiser(config, realization, plan.phases, plan.params.sqrt_p, grad_power, dimension);
  }
  if (impairment.uniform_noise_rad > 0.0) {
    plan.phases = perturb_phases(plan.phases, impairment.uniform_noise_rad, stream);
  }
  return plan;
}

}  // namespace airfl
