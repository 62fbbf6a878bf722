#include "airfl/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "airfl/stats.hpp"

namespace airfl {
namespace {

void check_targets(const SystemConfig& config, std::span<const double> beta, const char* who) {
  if (config.num_targets < 1) throw std::invalid_argument(std::string(who) + ": K must be >= 1");
  if (beta.size() < config.num_targets) {
    throw std::invalid_argument(std::string(who) + ": need at least K betas");
  }
  for (std::size_t k = 0; k < config.num_targets; ++k) {
    if (!(beta[k] > 0.0)) throw std::invalid_argument(std::string(who) + ": beta must be positive");
  }
}

std::vector<double> interferer_amplitudes(const SystemConfig& config) {
  return std::vector<double>(config.num_interferers, std::sqrt(config.interferer_power_w));
}

}  // namespace

std::string_view to_string(SchemeId id) {
  switch (id) {
    case SchemeId::SchemeI: return "scheme1";
    case SchemeId::SchemeII: return "scheme2";
    case SchemeId::BEV: return "bev";
    case SchemeId::BEVminMSE: return "bev_minmse";
  }
  return "unknown";
}

std::vector<double> alphas(const SystemConfig& config, std::span<const double> beta) {
  std::vector<double> a(beta.size());
  for (std::size_t i = 0; i < beta.size(); ++i) {
    const double p = i < config.num_targets ? config.target_power_w : config.interferer_power_w;
    a[i] = beta[i] * std::sqrt(p);
  }
  return a;
}

SchemeParams scheme1_params(const SystemConfig& config, std::span<const double> beta) {
  check_targets(config, beta, "scheme1_params");
  const std::size_t K = config.num_targets;
  const double G = config.gradient_bound;
  const auto alpha = alphas(config, beta);
  const double min_alpha = *std::min_element(alpha.begin(), alpha.begin() + static_cast<long>(K));
  const double zeta = min_alpha / G;

  SchemeParams p;
  p.scheme_id = SchemeId::SchemeI;
  p.sqrt_p.resize(K);
  for (std::size_t k = 0; k < K; ++k) p.sqrt_p[k] = zeta / beta[k];
  p.w.assign(K, 1.0);
  p.lambda = stats::kPi * static_cast<double>(config.ris_elements) * std::sqrt(static_cast<double>(K)) *
             min_alpha / (4.0 * G);
  p.interferer_sqrt_p = interferer_amplitudes(config);
  return p;
}

SchemeParams scheme2_params(const SystemConfig& config, std::span<const double> beta) {
  check_targets(config, beta, "scheme2_params");
  const std::size_t K = config.num_targets;
  const double G = config.gradient_bound;
  const double sqrt_pk = std::sqrt(config.target_power_w);

  SchemeParams p;
  p.scheme_id = SchemeId::SchemeII;
  p.sqrt_p.assign(K, sqrt_pk / G);
  p.w.resize(K);
  double sum_w2 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    p.w[k] = 1.0 / (beta[k] * sqrt_pk);
    sum_w2 += p.w[k] * p.w[k];
  }
  p.lambda = stats::kPi * static_cast<double>(config.ris_elements) * static_cast<double>(K) /
             (4.0 * G * std::sqrt(sum_w2));
  p.interferer_sqrt_p = interferer_amplitudes(config);
  return p;
}

SchemeParams bev_params(const SystemConfig& config, std::span<const double> beta, LambdaRule rule,
                        PhasePolicy policy, std::size_t round, double fixed_lambda) {
  check_targets(config, beta, "bev_params");
  const std::size_t K = config.num_targets;
  const double Kd = static_cast<double>(K);
  const double N = static_cast<double>(config.ris_elements);

  SchemeParams p;
  p.scheme_id = SchemeId::BEV;
  p.sqrt_p.assign(K, std::sqrt(config.target_power_w) / config.gradient_bound);
  p.w.assign(K, 1.0);
  p.interferer_sqrt_p = interferer_amplitudes(config);

  switch (rule) {
    case LambdaRule::Fixed:
      p.lambda = fixed_lambda;
      break;
    case LambdaRule::MatchMean:
      switch (policy) {
        case PhasePolicy::Aligned: {
          // E[u_k] = pi N / (4 sqrt(K)) for every k with equal weights.
          double sum = 0.0;
          for (std::size_t k = 0; k < K; ++k) sum += beta[k] * p.sqrt_p[k];
          p.lambda = sum * stats::kPi * N / (4.0 * std::sqrt(Kd));
          break;
        }
        case PhasePolicy::RoundRobin: {
          // Only the scheduled device has a coherent mean, pi N / 4.
          const std::size_t j = round_robin_device(round, K);
          p.lambda = beta[j] * p.sqrt_p[j] * stats::kPi * N / 4.0;
          break;
        }
        case PhasePolicy::Random: {
          // E[u_k^2] = N / 2 for random phases.
          double sum = 0.0;
          for (std::size_t k = 0; k < K; ++k) sum += beta[k] * beta[k] * p.sqrt_p[k] * p.sqrt_p[k];
          p.lambda = std::sqrt(Kd * sum * N / 2.0);
          break;
        }
      }
      break;
  }
  if (!(p.lambda > 0.0)) throw std::invalid_argument("bev_params: lambda must be positive");
  return p;
}

double min_mse_denoiser(const SystemConfig& config, const ChannelRealization& realization,
                        const RisPhases& phases, std::span<const double> sqrt_p, double grad_power,
                        std::size_t dimension) {
  const std::size_t K = config.num_targets;
  if (sqrt_p.size() != K || realization.h_r.size() != config.num_devices()) {
    throw std::invalid_argument("min_mse_denoiser: dimension mismatch");
  }
  if (!(grad_power > 0.0)) throw std::invalid_argument("min_mse_denoiser: grad_power must be positive");

  double sum_a = 0.0, sum_a2 = 0.0;
  bool all_zero = true;
  for (std::size_t k = 0; k < K; ++k) {
    const double a =
        realization.beta[k] * sqrt_p[k] * effective_coefficient(realization.h_p, phases, realization.h_r[k]);
    if (a != 0.0) all_zero = false;
    sum_a += a;
    sum_a2 += a * a;
  }
  if (all_zero) return 1.0;

  const double sqrt_pm = std::sqrt(config.interferer_power_w);
  double sum_b2 = 0.0;
  for (std::size_t i = K; i < config.num_devices(); ++i) {
    const double b =
        realization.beta[i] * sqrt_pm * effective_coefficient(realization.h_p, phases, realization.h_r[i]);
    sum_b2 += b * b;
  }
  const double noise = 0.5 * config.noise_variance() * static_cast<double>(dimension);
  const double x = (grad_power / static_cast<double>(K)) * sum_a / (grad_power * sum_a2 + sum_b2 + noise);
  if (!(x > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / x;
}

}  // namespace airfl
