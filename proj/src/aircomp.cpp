#include "airfl/aircomp.hpp"

#include <cmath>
#include <stdexcept>

namespace airfl {
namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

Vector random_unit(std::size_t dimension, RngStream& stream) {
  Vector v(dimension);
  double n2 = 0.0;
  do {
    for (auto& x : v) x = stream.normal();
    n2 = norm2(v);
  } while (n2 == 0.0);
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

}  // namespace

std::string_view to_string(InterferenceMode mode) {
  switch (mode) {
    case InterferenceMode::RandomUnit: return "random_unit";
    case InterferenceMode::ZeroGradientAttack: return "zero_gradient_attack";
    case InterferenceMode::ConstantUnit: return "constant_unit";
  }
  return "unknown";
}

std::optional<InterferenceMode> interference_mode_from_string(std::string_view name) {
  if (name == "random_unit") return InterferenceMode::RandomUnit;
  if (name == "zero_gradient_attack") return InterferenceMode::ZeroGradientAttack;
  if (name == "constant_unit") return InterferenceMode::ConstantUnit;
  return std::nullopt;
}

InterferenceDraw make_interference(InterferenceMode mode, std::size_t num_interferers, std::size_t dimension,
                                   std::optional<std::span<const double>> context, RngStream& stream) {
  if (dimension < 1) throw std::invalid_argument("make_interference: dimension must be >= 1");
  InterferenceDraw out;
  out.signals.reserve(num_interferers);

  if (mode == InterferenceMode::ZeroGradientAttack) {
    const double n2 = context ? norm2(*context) : 0.0;
    if (context && context->size() != dimension) {
      throw std::invalid_argument("make_interference: context dimension mismatch");
    }
    if (n2 > 0.0) {
      const double inv = -1.0 / std::sqrt(n2);
      Vector v(context->begin(), context->end());
      for (auto& x : v) x *= inv;
      out.signals.assign(num_interferers, v);
      return out;
    }
    out.fell_back = true;
    mode = InterferenceMode::RandomUnit;
  }
  if (mode == InterferenceMode::ConstantUnit) {
    Vector e1(dimension, 0.0);
    e1[0] = 1.0;
    out.signals.assign(num_interferers, e1);
    return out;
  }
  for (std::size_t m = 0; m < num_interferers; ++m) out.signals.push_back(random_unit(dimension, stream));
  return out;
}

std::vector<double> device_coefficients(const ChannelRealization& realization, const RisPhases& phases,
                                        const SchemeParams& params) {
  const std::size_t K = params.sqrt_p.size();
  const std::size_t M = params.interferer_sqrt_p.size();
  if (realization.h_r.size() != K + M || realization.beta.size() != K + M) {
    throw std::invalid_argument("device_coefficients: realization does not match scheme dimensions");
  }
  if (!(params.lambda > 0.0)) throw std::invalid_argument("device_coefficients: lambda must be positive");
  std::vector<double> l(K + M);
  for (std::size_t i = 0; i < K + M; ++i) {
    const double amp = i < K ? params.sqrt_p[i] : params.interferer_sqrt_p[i - K];
    const double u = effective_coefficient(realization.h_p, phases, realization.h_r[i]);
    l[i] = realization.beta[i] * amp * u / params.lambda;
  }
  return l;
}

RoundResult ota_round_from_coefficients(const GradientSet& grads, std::span<const double> coefficients,
                                        double lambda, double sigma2, RngStream& stream) {
  const std::size_t K = grads.targets.size();
  const std::size_t M = grads.interferers.size();
  if (K == 0) throw std::invalid_argument("ota_round: no target gradients");
  if (coefficients.size() != K + M) throw std::invalid_argument("ota_round: coefficient count mismatch");
  if (!(lambda > 0.0)) throw std::invalid_argument("ota_round: lambda must be positive");
  if (sigma2 < 0.0) throw std::invalid_argument("ota_round: sigma2 must be non-negative");
  const std::size_t D = grads.dimension();
  for (const auto& g : grads.targets) {
    if (g.size() != D) throw std::invalid_argument("ota_round: gradient dimension mismatch");
  }
  for (const auto& g : grads.interferers) {
    if (g.size() != D) throw std::invalid_argument("ota_round: interference dimension mismatch");
  }

  const double invK = 1.0 / static_cast<double>(K);
  Vector comp(D, 0.0), interf(D, 0.0), noise(D, 0.0);
  RoundResult r;
  r.estimate.assign(D, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double l = coefficients[k];
    const double dev = l - invK;
    const auto& g = grads.targets[k];
    for (std::size_t d = 0; d < D; ++d) {
      r.estimate[d] += l * g[d];
      comp[d] += dev * g[d];
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    const double l = coefficients[K + m];
    const auto& g = grads.interferers[m];
    for (std::size_t d = 0; d < D; ++d) interf[d] += l * g[d];
  }
  // Re{z} has variance sigma^2 / 2 per entry. An infinite lambda (zero
  // estimator) leaves no noise.
  if (sigma2 > 0.0 && std::isfinite(lambda)) {
    const double scale = std::sqrt(0.5 * sigma2) / lambda;
    for (auto& z : noise) z = scale * stream.normal();
  }

  r.error.epsilon.resize(D);
  for (std::size_t d = 0; d < D; ++d) {
    r.estimate[d] += interf[d] + noise[d];
    r.error.epsilon[d] = comp[d] + interf[d] + noise[d];
  }
  r.error.sq_norm = norm2(r.error.epsilon);
  r.error.computation_sq = norm2(comp);
  r.error.interference_sq = norm2(interf);
  r.error.noise_sq = norm2(noise);
  return r;
}

RoundResult ota_round(const GradientSet& grads, const ChannelRealization& realization, const RisPhases& phases,
                      const SchemeParams& params, double sigma2, RngStream& stream) {
  if (grads.targets.size() != params.sqrt_p.size() || grads.interferers.size() != params.interferer_sqrt_p.size()) {
    throw std::invalid_argument("ota_round: gradient set does not match scheme dimensions");
  }
  const auto l = device_coefficients(realization, phases, params);
  return ota_round_from_coefficients(grads, l, params.lambda, sigma2, stream);
}

Vector ideal_round(const GradientSet& grads) {
  if (grads.targets.empty()) throw std::invalid_argument("ideal_round: K must be >= 1");
  const std::size_t D = grads.dimension();
  Vector mean(D, 0.0);
  for (const auto& g : grads.targets) {
    if (g.size() != D) throw std::invalid_argument("ideal_round: gradient dimension mismatch");
    for (std::size_t d = 0; d < D; ++d) mean[d] += g[d];
  }
  const double invK = 1.0 / static_cast<double>(grads.targets.size());
  for (auto& x : mean) x *= invK;
  return mean;
}

}  // namespace airfl
