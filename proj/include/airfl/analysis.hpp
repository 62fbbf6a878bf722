#pragma once

#include <span>
#include <vector>

#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"
#include "airfl/schemes.hpp"

namespace airfl::analysis {

// Second-order statistics of the local gradients that enter the MSE.
struct GradientStats {
  std::vector<double> self_moment;                // E||g_k||^2
  std::vector<std::vector<double>> cross_moment;  // E[g_k^T g_k'], diagonal unused
  std::size_t dimension = 0;                      // D

  [[nodiscard]] std::size_t num_targets() const { return self_moment.size(); }
  // E||g_t||^2 for the average g_t = (1/K) sum_k g_k.
  [[nodiscard]] double global_power() const;
  // Throws if a moment is negative or a cross moment breaks Cauchy-Schwarz.
  void validate() const;
};

// Exact statistics of one fixed gradient set.
GradientStats stats_of(const GradientSet& grads);
// Sample means over a collection of gradient sets (e.g. recorded rounds).
GradientStats stats_of(std::span<const GradientSet> sets);

struct MseBreakdown {
  double computation = 0.0;
  double interference = 0.0;
  double noise = 0.0;
  double total = 0.0;
  SchemeId scheme_id = SchemeId::SchemeI;

  [[nodiscard]] MseBreakdown scaled(double factor) const;
};

struct ConvergenceBound {
  double varpi = 0.0;
  double epsilon_bias = 0.0;
  double bound_at_T = 0.0;
};

// E[u_k] under weighted alignment: pi N w_k / (4 sqrt(sum_i w_i^2)).
double mean_u(std::span<const double> w, std::size_t k, std::size_t N);
// E[u_k^2] = N/2 + (8N + pi^2 N (N-1)) / 16 * w_k^2 / sum_i w_i^2.
double second_moment_u(std::span<const double> w, std::size_t k, std::size_t N);
// E[u_k u_k'] = (N/2 + pi^2 N (N-1) / 16) * w_k w_k' / sum_i w_i^2, k != k'.
double cross_moment_u(std::span<const double> w, std::size_t k, std::size_t k2, std::size_t N);
// E[u_m^2] = N/2 for a device the surface is not aligned to.
double interferer_second_moment_u(std::size_t N);

struct CoefficientVariances {
  std::vector<double> target;      // V[l_k]
  std::vector<double> interferer;  // V[l_m]
};
CoefficientVariances coeff_variances(const SchemeParams& params, std::span<const double> beta, std::size_t N);

// Closed-form MSE of Scheme I or II, split into computation, interference
// and noise errors. Any other scheme id is rejected.
MseBreakdown closed_form_mse(SchemeId scheme_id, const SystemConfig& config, std::span<const double> beta,
                             const GradientStats& gstats);

// The same MSE assembled from the coefficient moments for arbitrary scheme
// parameters used with weighted alignment phases. Agrees with
// closed_form_mse for Schemes I and II.
MseBreakdown mse_from_moments(const SchemeParams& params, const SystemConfig& config,
                              std::span<const double> beta, const GradientStats& gstats);

// Scaling factor, bias term and the bound
//   (2 varpi / sqrt(T)) (f_gap + epsilon / (2 varpi^2))
// on the average squared gradient norm over T rounds.
ConvergenceBound convergence_bound(SchemeId scheme_id, const SystemConfig& config, std::span<const double> beta,
                                   double L, double xi, double chi2, std::size_t T, double f_gap,
                                   std::size_t dimension);

}  // namespace airfl::analysis
