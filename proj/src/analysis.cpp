#include "airfl/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "airfl/stats.hpp"

namespace airfl::analysis {
namespace {

using stats::kPi;
constexpr double kPi2 = kPi * kPi;

double sum_sq(std::span<const double> w) {
  if (w.empty()) throw std::invalid_argument("weights must be non-empty");
  double s = 0.0;
  for (double x : w) {
    if (!(x > 0.0)) throw std::invalid_argument("weights must be positive");
    s += x * x;
  }
  return s;
}

void check_index(std::span<const double> w, std::size_t k) {
  if (k >= w.size()) throw std::out_of_range("device index out of range");
}

// Alphas of targets and interferers plus the aggregates the closed forms use.
struct AlphaSummary {
  std::vector<double> target;
  std::vector<double> interferer;
  double min_sq = 0.0;      // min_k alpha_k^2
  double inv_sq_sum = 0.0;  // sum_k alpha_k^-2
  double sq_sum = 0.0;      // sum_k alpha_k^2
};

AlphaSummary summarize(const SystemConfig& config, std::span<const double> beta) {
  const std::size_t K = config.num_targets;
  const std::size_t M = config.num_interferers;
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (beta.size() != K + M) throw std::invalid_argument("need one beta per device");
  const auto a = alphas(config, beta);
  AlphaSummary s;
  s.target.assign(a.begin(), a.begin() + static_cast<long>(K));
  s.interferer.assign(a.begin() + static_cast<long>(K), a.end());
  s.min_sq = std::numeric_limits<double>::infinity();
  for (double x : s.target) {
    if (!(x > 0.0)) throw std::invalid_argument("target alphas must be positive");
    s.min_sq = std::min(s.min_sq, x * x);
    s.inv_sq_sum += 1.0 / (x * x);
    s.sq_sum += x * x;
  }
  return s;
}

struct SideTerms {
  double interference = 0.0;
  double noise = 0.0;
};

SideTerms side_terms(SchemeId id, const SystemConfig& config, const AlphaSummary& a, std::size_t D) {
  const double K = static_cast<double>(config.num_targets);
  const double N = static_cast<double>(config.ris_elements);
  const double G2 = config.gradient_bound * config.gradient_bound;
  const double sigma2 = config.noise_variance();
  double sum_am2 = 0.0;
  for (double x : a.interferer) sum_am2 += x * x;

  SideTerms t;
  switch (id) {
    case SchemeId::SchemeI:
      t.interference = 8.0 * G2 * sum_am2 / (kPi2 * N * K * a.min_sq);
      t.noise = 8.0 * G2 * sigma2 * static_cast<double>(D) / (kPi2 * N * N * K * a.min_sq);
      break;
    case SchemeId::SchemeII:
      t.interference = 8.0 * G2 * a.inv_sq_sum * sum_am2 / (kPi2 * N * K * K);
      t.noise = 8.0 * G2 * sigma2 * static_cast<double>(D) * a.inv_sq_sum / (kPi2 * N * N * K * K);
      break;
    default:
      throw std::invalid_argument("closed forms exist for Scheme I and Scheme II only");
  }
  return t;
}

double cross_sum(const GradientStats& g) {
  double s = 0.0;
  const std::size_t K = g.num_targets();
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < K; ++j) {
      if (j != k) s += g.cross_moment[k][j];
    }
  }
  return s;
}

}  // namespace

double GradientStats::global_power() const {
  const std::size_t K = num_targets();
  if (K == 0) return 0.0;
  double s = 0.0;
  for (double x : self_moment) s += x;
  s += cross_sum(*this);
  return s / static_cast<double>(K * K);
}

void GradientStats::validate() const {
  const std::size_t K = num_targets();
  if (K == 0) throw std::invalid_argument("GradientStats: no targets");
  if (cross_moment.size() != K) throw std::invalid_argument("GradientStats: cross moment must be K x K");
  for (std::size_t k = 0; k < K; ++k) {
    if (!(self_moment[k] >= 0.0)) throw std::invalid_argument("GradientStats: negative self moment");
    if (cross_moment[k].size() != K) throw std::invalid_argument("GradientStats: cross moment must be K x K");
  }
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = 0; j < K; ++j) {
      if (j == k) continue;
      const double bound = std::sqrt(self_moment[k] * self_moment[j]);
      if (std::abs(cross_moment[k][j]) > bound * (1.0 + 1e-9) + 1e-300) {
        throw std::invalid_argument("GradientStats: cross moment violates Cauchy-Schwarz");
      }
    }
  }
}

GradientStats stats_of(const GradientSet& grads) { return stats_of(std::span<const GradientSet>(&grads, 1)); }

GradientStats stats_of(std::span<const GradientSet> sets) {
  if (sets.empty()) throw std::invalid_argument("stats_of: no gradient sets");
  const std::size_t K = sets.front().targets.size();
  GradientStats g;
  g.dimension = sets.front().dimension();
  g.self_moment.assign(K, 0.0);
  g.cross_moment.assign(K, std::vector<double>(K, 0.0));
  for (const auto& set : sets) {
    if (set.targets.size() != K) throw std::invalid_argument("stats_of: inconsistent K");
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = k; j < K; ++j) {
        double dot = 0.0;
        const auto& a = set.targets[k];
        const auto& b = set.targets[j];
        for (std::size_t d = 0; d < a.size(); ++d) dot += a[d] * b[d];
        if (j == k) {
          g.self_moment[k] += dot;
        } else {
          g.cross_moment[k][j] += dot;
        }
      }
    }
  }
  const double inv = 1.0 / static_cast<double>(sets.size());
  for (std::size_t k = 0; k < K; ++k) {
    g.self_moment[k] *= inv;
    for (std::size_t j = k + 1; j < K; ++j) {
      g.cross_moment[k][j] *= inv;
      g.cross_moment[j][k] = g.cross_moment[k][j];
    }
  }
  return g;
}

MseBreakdown MseBreakdown::scaled(double factor) const {
  MseBreakdown b = *this;
  b.computation *= factor;
  b.interference *= factor;
  b.noise *= factor;
  b.total *= factor;
  return b;
}

double mean_u(std::span<const double> w, std::size_t k, std::size_t N) {
  const double s = sum_sq(w);
  check_index(w, k);
  return kPi * static_cast<double>(N) * w[k] / (4.0 * std::sqrt(s));
}

double second_moment_u(std::span<const double> w, std::size_t k, std::size_t N) {
  const double s = sum_sq(w);
  check_index(w, k);
  const double n = static_cast<double>(N);
  return n / 2.0 + (8.0 * n + kPi2 * n * (n - 1.0)) / 16.0 * w[k] * w[k] / s;
}

double cross_moment_u(std::span<const double> w, std::size_t k, std::size_t k2, std::size_t N) {
  const double s = sum_sq(w);
  check_index(w, k);
  check_index(w, k2);
  if (k == k2) throw std::invalid_argument("cross_moment_u: indices must differ");
  const double n = static_cast<double>(N);
  return (n / 2.0 + kPi2 * n * (n - 1.0) / 16.0) * w[k] * w[k2] / s;
}

double interferer_second_moment_u(std::size_t N) {
  if (N < 1) throw std::invalid_argument("interferer_second_moment_u: N must be >= 1");
  return static_cast<double>(N) / 2.0;
}

CoefficientVariances coeff_variances(const SchemeParams& params, std::span<const double> beta, std::size_t N) {
  if (!(params.lambda > 0.0)) throw std::invalid_argument("coeff_variances: lambda must be positive");
  const std::size_t K = params.sqrt_p.size();
  const std::size_t M = params.interferer_sqrt_p.size();
  if (beta.size() != K + M) throw std::invalid_argument("coeff_variances: need one beta per device");
  const double s = sum_sq(params.w);
  const double n = static_cast<double>(N);
  const double lam2 = params.lambda * params.lambda;
  CoefficientVariances v;
  for (std::size_t k = 0; k < K; ++k) {
    const double c2 = beta[k] * beta[k] * params.sqrt_p[k] * params.sqrt_p[k] / lam2;
    v.target.push_back(c2 * (n / 2.0 + (8.0 - kPi2) * params.w[k] * params.w[k] * n / (16.0 * s)));
  }
  for (std::size_t m = 0; m < M; ++m) {
    const double b = beta[K + m] * params.interferer_sqrt_p[m];
    v.interferer.push_back(b * b * n / (2.0 * lam2));
  }
  return v;
}

MseBreakdown closed_form_mse(SchemeId scheme_id, const SystemConfig& config, std::span<const double> beta,
                             const GradientStats& gstats) {
  const std::size_t K = config.num_targets;
  if (gstats.num_targets() != K) throw std::invalid_argument("closed_form_mse: gradient stats must cover K targets");
  const auto a = summarize(config, beta);
  const SideTerms side = side_terms(scheme_id, config, a, gstats.dimension);

  const double Kd = static_cast<double>(K);
  const double N = static_cast<double>(config.ris_elements);
  const double denom = kPi2 * N * Kd * Kd;
  const double cross = (8.0 - kPi2) / denom * cross_sum(gstats);

  double self = 0.0;
  if (scheme_id == SchemeId::SchemeI) {
    double sum_self = 0.0;
    for (double x : gstats.self_moment) sum_self += x;
    self = (8.0 * (Kd + 1.0) - kPi2) / denom * sum_self;
  } else {
    for (std::size_t k = 0; k < K; ++k) {
      const double ratio = a.target[k] * a.target[k] * a.inv_sq_sum;
      self += (8.0 * (ratio + 1.0) - kPi2) / denom * gstats.self_moment[k];
    }
  }

  MseBreakdown b;
  b.scheme_id = scheme_id;
  b.computation = self + cross;
  b.interference = side.interference;
  b.noise = side.noise;
  b.total = b.computation + b.interference + b.noise;
  return b;
}

MseBreakdown mse_from_moments(const SchemeParams& params, const SystemConfig& config,
                              std::span<const double> beta, const GradientStats& gstats) {
  const std::size_t K = params.sqrt_p.size();
  const std::size_t M = params.interferer_sqrt_p.size();
  const std::size_t N = config.ris_elements;
  if (beta.size() != K + M || gstats.num_targets() != K) {
    throw std::invalid_argument("mse_from_moments: dimension mismatch");
  }
  const double invK = 1.0 / static_cast<double>(K);
  std::vector<double> c(K), mean(K);
  for (std::size_t k = 0; k < K; ++k) {
    c[k] = beta[k] * params.sqrt_p[k] / params.lambda;
    mean[k] = c[k] * mean_u(params.w, k, N);
  }

  MseBreakdown b;
  b.scheme_id = params.scheme_id;
  for (std::size_t k = 0; k < K; ++k) {
    const double e2 = c[k] * c[k] * second_moment_u(params.w, k, N);
    b.computation += (e2 - 2.0 * invK * mean[k] + invK * invK) * gstats.self_moment[k];
    for (std::size_t j = 0; j < K; ++j) {
      if (j == k) continue;
      const double ekj = c[k] * c[j] * cross_moment_u(params.w, k, j, N);
      b.computation += (ekj - invK * mean[k] - invK * mean[j] + invK * invK) * gstats.cross_moment[k][j];
    }
  }
  for (std::size_t m = 0; m < M; ++m) {
    const double cm = beta[K + m] * params.interferer_sqrt_p[m] / params.lambda;
    b.interference += cm * cm * interferer_second_moment_u(N);
  }
  b.noise = config.noise_variance() * static_cast<double>(gstats.dimension) /
            (2.0 * params.lambda * params.lambda);
  b.total = b.computation + b.interference + b.noise;
  return b;
}

ConvergenceBound convergence_bound(SchemeId scheme_id, const SystemConfig& config, std::span<const double> beta,
                                   double L, double xi, double chi2, std::size_t T, double f_gap,
                                   std::size_t dimension) {
  if (!(L > 0.0) || !(xi > 0.0) || !(chi2 > 0.0) || T == 0 || !(f_gap > 0.0)) {
    throw std::invalid_argument("convergence_bound: L, xi, chi2, T and f_gap must be positive");
  }
  const auto a = summarize(config, beta);
  const SideTerms side = side_terms(scheme_id, config, a, dimension);
  const double K = static_cast<double>(config.num_targets);
  const double N = static_cast<double>(config.ris_elements);
  const double xi2 = xi * xi;

  ConvergenceBound b;
  if (scheme_id == SchemeId::SchemeI) {
    b.varpi = ((16.0 - kPi2) * xi2 / (kPi2 * N) + 1.0) * L;
    b.epsilon_bias =
        ((8.0 * (K + 1.0) + kPi2 * (N - 1.0)) / (kPi2 * N * K) * chi2 + side.interference + side.noise) * L;
  } else {
    const double spread = a.sq_sum * a.inv_sq_sum;  // >= K^2
    b.varpi = ((8.0 / (K * K) * spread + 8.0 - kPi2) / (kPi2 * N) * xi2 + 1.0) * L;
    b.epsilon_bias =
        ((8.0 / K * spread + 8.0 + kPi2 * (N - 1.0)) / (kPi2 * N * K) * chi2 + side.interference + side.noise) * L;
  }
  b.bound_at_T = 2.0 * b.varpi / std::sqrt(static_cast<double>(T)) *
                 (f_gap + b.epsilon_bias / (2.0 * b.varpi * b.varpi));
  return b;
}

}  // namespace airfl::analysis
