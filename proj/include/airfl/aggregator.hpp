#pragma once

#include <optional>
#include <string_view>

#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"
#include "airfl/ris.hpp"
#include "airfl/schemes.hpp"

namespace airfl {

// A complete transmission strategy: power control, surface phase policy and
// receive scaling.
enum class Strategy {
  SchemeI,        // large-scale power inversion + weighted alignment
  SchemeII,       // full power + inverse-alpha surface weights
  BevRandom,      // full power + random phases
  BevRoundRobin,  // full power + alignment to one device per round
  BevMinMse,      // full power + equal-weight alignment + per-round min-MSE lambda
};

std::string_view to_string(Strategy s);
std::optional<Strategy> strategy_from_string(std::string_view name);
// Schemes I and II have closed-form MSE expressions.
bool has_closed_form(Strategy s);
SchemeId scheme_id_of(Strategy s);
PhasePolicy phase_policy_of(Strategy s);

// Hardware non-idealities applied to whatever phases the strategy picks.
// quantization_bits == 0 means continuous phases.
struct PhaseImpairment {
  int quantization_bits = 0;
  double uniform_noise_rad = 0.0;

  [[nodiscard]] bool none() const { return quantization_bits == 0 && uniform_noise_rad == 0.0; }
};

struct RoundPlan {
  SchemeParams params;
  RisPhases phases;
};

// Parameters and phases for one round. `round` drives round-robin
// scheduling; `grad_power` and `dimension` feed the min-MSE denoiser.
// `stream` supplies random phases and phase noise.
RoundPlan plan_round(Strategy strategy, const SystemConfig& config, const ChannelRealization& realization,
                     const PhaseImpairment& impairment, std::size_t round, double grad_power,
                     std::size_t dimension, RngStream& stream);

}  // namespace airfl
