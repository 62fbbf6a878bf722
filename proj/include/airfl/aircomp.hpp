#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "airfl/channel.hpp"
#include "airfl/ris.hpp"
#include "airfl/schemes.hpp"

namespace airfl {

using Vector = std::vector<double>;

struct GradientSet {
  std::vector<Vector> targets;      // K local gradients, norm <= G
  std::vector<Vector> interferers;  // M unit-norm interference signals

  [[nodiscard]] std::size_t dimension() const { return targets.empty() ? 0 : targets.front().size(); }
};

// Error of one aggregation round. The three component norms split epsilon
// into its misalignment, interference and noise parts; their expectations add
// up to E[sq_norm] because the cross terms have zero mean.
struct RoundErrorStats {
  Vector epsilon;
  double sq_norm = 0.0;
  double computation_sq = 0.0;
  double interference_sq = 0.0;
  double noise_sq = 0.0;
};

struct RoundResult {
  Vector estimate;
  RoundErrorStats error;
};

enum class InterferenceMode { RandomUnit, ZeroGradientAttack, ConstantUnit };

std::string_view to_string(InterferenceMode mode);
std::optional<InterferenceMode> interference_mode_from_string(std::string_view name);

struct InterferenceDraw {
  std::vector<Vector> signals;
  // True when a zero-gradient attack had no usable context and random unit
  // vectors were sent instead.
  bool fell_back = false;
};

// M unit-norm interference signals of dimension D. The zero-gradient attack
// sends -context / ||context||.
InterferenceDraw make_interference(InterferenceMode mode, std::size_t num_interferers, std::size_t dimension,
                                   std::optional<std::span<const double>> context, RngStream& stream);

// Aggregation (l_k) and interference (l_m) coefficients of every device under
// one realization and phase set, targets first.
std::vector<double> device_coefficients(const ChannelRealization& realization, const RisPhases& phases,
                                        const SchemeParams& params);

// One over-the-air round: superposition through the cascaded channels, AWGN
// with variance sigma2 per complex entry, and the Re{y}/lambda estimator.
RoundResult ota_round(const GradientSet& grads, const ChannelRealization& realization, const RisPhases& phases,
                      const SchemeParams& params, double sigma2, RngStream& stream);

// Same as ota_round with precomputed coefficients.
RoundResult ota_round_from_coefficients(const GradientSet& grads, std::span<const double> coefficients,
                                        double lambda, double sigma2, RngStream& stream);

// Error-free average of the target gradients.
Vector ideal_round(const GradientSet& grads);

}  // namespace airfl
