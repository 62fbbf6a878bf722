#include "airfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "airfl/stats.hpp"

namespace airfl::harness {
namespace {

std::size_t block_count(std::size_t trials) { return (trials + kBlockSize - 1) / kBlockSize; }

void check_trials(std::size_t trials, const char* who) {
  if (trials < kMinTrials) {
    throw std::invalid_argument(std::string(who) + ": at least " + std::to_string(kMinTrials) + " trials required");
  }
}

// Runs `trials` trials in blocks and merges the per-block accumulators in
// block order. `make` builds a fresh set of accumulators; `trial` adds one
// trial's values.
template <typename Acc, typename Make, typename Trial>
Acc run_blocks(std::size_t trials, std::size_t workers, Make make, Trial trial) {
  const std::size_t blocks = block_count(trials);
  std::vector<Acc> partial(blocks, make());
  parallel_for(blocks, workers, [&](std::size_t b) {
    Acc& acc = partial[b];
    const std::size_t end = std::min(trials, (b + 1) * kBlockSize);
    for (std::size_t t = b * kBlockSize; t < end; ++t) trial(t, acc);
  });
  Acc total = make();
  for (const auto& p : partial) total.merge(p);
  return total;
}

struct AccVector {
  std::vector<Accumulator> items;
  void merge(const AccVector& o) {
    for (std::size_t i = 0; i < items.size(); ++i) items[i].merge(o.items[i]);
  }
};

Vector unit_gaussian(std::size_t D, RngStream& s) {
  Vector v(D);
  double n2 = 0.0;
  while (n2 == 0.0) {
    for (auto& x : v) x = s.normal();
    n2 = 0.0;
    for (double x : v) n2 += x * x;
  }
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& x : v) x *= inv;
  return v;
}

bool is_integer(double v) { return std::isfinite(v) && std::floor(v) == v; }

}  // namespace

void MomentEstimate::attach(double t) {
  target = t;
  if (std_error > 0.0) {
    z_score = (mean - t) / std_error;
  } else {
    z_score = mean == t ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean - t);
  }
}

bool MomentEstimate::within(double rel, double k) const {
  if (!target) return false;
  const double tol = std::max(rel * std::abs(*target), k * std_error);
  return std::abs(mean - *target) <= tol;
}

void Accumulator::add(double x) {
  const double d = x - shift_;
  const double d2 = d * d;
  ++n_;
  s1_.add(d);
  s2_.add(d2);
  s3_.add(d2 * d);
  s4_.add(d2 * d2);
}

void Accumulator::merge(const Accumulator& o) {
  n_ += o.n_;
  s1_.add(o.s1_.value());
  s2_.add(o.s2_.value());
  s3_.add(o.s3_.value());
  s4_.add(o.s4_.value());
}

MomentEstimate Accumulator::mean() const {
  MomentEstimate e;
  e.trials = n_;
  if (n_ == 0) return e;
  const double n = static_cast<double>(n_);
  const double a = s1_.value() / n;
  e.mean = a + shift_;
  if (n_ > 1) e.variance = std::max(0.0, (s2_.value() - n * a * a) / (n - 1.0));
  e.std_error = std::sqrt(e.variance / n);
  return e;
}

MomentEstimate Accumulator::variance() const {
  MomentEstimate e;
  e.trials = n_;
  if (n_ < 2) return e;
  const double n = static_cast<double>(n_);
  const double a = s1_.value() / n;
  const double m2 = s2_.value() / n, m3 = s3_.value() / n, m4 = s4_.value() / n;
  const double v = std::max(0.0, (s2_.value() - n * a * a) / (n - 1.0));
  const double mu4 = m4 - 4.0 * a * m3 + 6.0 * a * a * m2 - 3.0 * a * a * a * a;
  e.mean = v;
  e.variance = std::max(0.0, mu4 - v * v);
  e.std_error = std::sqrt(e.variance / n);
  return e;
}

double CoefficientMoments::max_abs_z() const {
  double z = 0.0;
  for (const auto* group : {&target_mean, &target_variance, &interferer_mean, &interferer_variance}) {
    for (const auto& e : *group) {
      if (e.z_score) z = std::max(z, std::abs(*e.z_score));
    }
  }
  return z;
}

CoefficientMoments estimate_coefficient_moments(const MomentRequest& req, std::size_t workers) {
  check_trials(req.trials, "estimate_coefficient_moments");
  req.config.validate();
  const std::size_t K = req.config.num_targets, M = req.config.num_interferers;
  if (req.beta.size() != K + M) throw std::invalid_argument("estimate_coefficient_moments: need one beta per device");
  if (!(req.lambda_scale > 0.0)) throw std::invalid_argument("estimate_coefficient_moments: lambda_scale must be positive");
  const double invK = 1.0 / static_cast<double>(K);
  const double G2 = req.config.gradient_bound * req.config.gradient_bound;

  auto make = [&] {
    AccVector a;
    for (std::size_t i = 0; i < K + M; ++i) a.items.emplace_back(i < K ? invK : 0.0);
    return a;
  };
  const auto acc = run_blocks<AccVector>(req.trials, workers, make, [&](std::size_t t, AccVector& a) {
    const RngStream s = derive_stream(req.seed, {{"moments", 0}, {"trial", t}});
    RngStream cs = s.child("channel");
    const auto realization = draw_realization(req.config, req.beta, cs);
    RngStream ps = s.child("plan");
    auto plan = plan_round(req.strategy, req.config, realization, req.impairment, t, G2, req.dimension, ps);
    plan.params.lambda *= req.lambda_scale;
    const auto l = device_coefficients(realization, plan.phases, plan.params);
    for (std::size_t i = 0; i < K + M; ++i) a.items[i].add(l[i]);
  });

  CoefficientMoments out;
  for (std::size_t i = 0; i < K + M; ++i) {
    auto m = acc.items[i].mean();
    auto v = acc.items[i].variance();
    (i < K ? out.target_mean : out.interferer_mean).push_back(m);
    (i < K ? out.target_variance : out.interferer_variance).push_back(v);
  }

  // Interferer coefficients have zero mean under every policy: flipping the
  // sign of an interferer's channel leaves phases and lambda unchanged.
  for (auto& e : out.interferer_mean) e.attach(0.0);

  const bool ideal = req.impairment.none();
  const std::size_t N = req.config.ris_elements;
  switch (req.strategy) {
    case Strategy::SchemeI:
    case Strategy::SchemeII: {
      if (!ideal) break;
      for (auto& e : out.target_mean) e.attach(invK);
      const auto params = req.strategy == Strategy::SchemeI ? scheme1_params(req.config, req.beta)
                                                            : scheme2_params(req.config, req.beta);
      const auto var = analysis::coeff_variances(params, req.beta, N);
      for (std::size_t k = 0; k < K; ++k) out.target_variance[k].attach(var.target[k]);
      for (std::size_t m = 0; m < M; ++m) out.interferer_variance[m].attach(var.interferer[m]);
      break;
    }
    case Strategy::BevRoundRobin:
      // Over whole scheduling cycles every device is served 1/K of the time.
      if (ideal && req.trials % K == 0) {
        for (auto& e : out.target_mean) e.attach(invK);
      }
      break;
    case Strategy::BevRandom: {
      for (auto& e : out.target_mean) e.attach(0.0);
      const auto params = bev_params(req.config, req.beta, LambdaRule::MatchMean, PhasePolicy::Random);
      const double lam = params.lambda;
      const double half_n = analysis::interferer_second_moment_u(N);
      for (std::size_t k = 0; k < K; ++k) {
        const double c = req.beta[k] * params.sqrt_p[k] / lam;
        out.target_variance[k].attach(c * c * half_n);
      }
      for (std::size_t m = 0; m < M; ++m) {
        const double c = req.beta[K + m] * params.interferer_sqrt_p[m] / lam;
        out.interferer_variance[m].attach(c * c * half_n);
      }
      break;
    }
    case Strategy::BevMinMse:
      break;
  }
  return out;
}

UMoments estimate_u_moments(std::size_t N, std::span<const double> w, std::size_t trials, std::uint64_t seed,
                            std::size_t workers) {
  check_trials(trials, "estimate_u_moments");
  const std::size_t K = w.size();
  if (K == 0 || N == 0) throw std::invalid_argument("estimate_u_moments: need N >= 1 and K >= 1");

  // Layout: K means, K second moments, K*(K-1)/2 cross moments, E[u_m^2], E[u_0 u_m].
  auto make = [&] {
    AccVector a;
    for (std::size_t k = 0; k < K; ++k) a.items.emplace_back(analysis::mean_u(w, k, N));
    for (std::size_t k = 0; k < K; ++k) a.items.emplace_back(analysis::second_moment_u(w, k, N));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = k + 1; j < K; ++j) a.items.emplace_back(analysis::cross_moment_u(w, k, j, N));
    }
    a.items.emplace_back(analysis::interferer_second_moment_u(N));
    a.items.emplace_back(0.0);
    return a;
  };
  const auto acc = run_blocks<AccVector>(trials, workers, make, [&](std::size_t t, AccVector& a) {
    RngStream s = derive_stream(seed, {{"u-moments", N}, {"trial", t}});
    const ComplexVector h_p = draw_complex_gaussian(N, s);
    std::vector<ComplexVector> h_r;
    h_r.reserve(K);
    for (std::size_t k = 0; k < K; ++k) h_r.push_back(draw_complex_gaussian(N, s));
    const ComplexVector h_m = draw_complex_gaussian(N, s);
    const auto phases = aligned_phases(h_p, h_r, w);
    std::vector<double> u(K);
    for (std::size_t k = 0; k < K; ++k) u[k] = effective_coefficient(h_p, phases, h_r[k]);
    const double um = effective_coefficient(h_p, phases, h_m);
    std::size_t i = 0;
    for (std::size_t k = 0; k < K; ++k) a.items[i++].add(u[k]);
    for (std::size_t k = 0; k < K; ++k) a.items[i++].add(u[k] * u[k]);
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = k + 1; j < K; ++j) a.items[i++].add(u[k] * u[j]);
    }
    a.items[i++].add(um * um);
    a.items[i].add(u[0] * um);
  });

  UMoments out;
  std::size_t i = 0;
  for (std::size_t k = 0; k < K; ++k, ++i) {
    out.mean.push_back(acc.items[i].mean());
    out.mean.back().attach(analysis::mean_u(w, k, N));
  }
  for (std::size_t k = 0; k < K; ++k, ++i) {
    out.second.push_back(acc.items[i].mean());
    out.second.back().attach(analysis::second_moment_u(w, k, N));
  }
  out.cross.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t j = k + 1; j < K; ++j, ++i) {
      out.cross[k].push_back(acc.items[i].mean());
      out.cross[k].back().attach(analysis::cross_moment_u(w, k, j, N));
    }
  }
  out.interferer_second = acc.items[i++].mean();
  out.interferer_second.attach(analysis::interferer_second_moment_u(N));
  out.interferer_cross = acc.items[i].mean();
  out.interferer_cross.attach(0.0);
  return out;
}

GradientSet synthetic_gradient_set(std::size_t K, std::size_t D, double G, double correlation, RngStream& stream) {
  if (K == 0 || D == 0) throw std::invalid_argument("synthetic_gradient_set: K and D must be positive");
  if (!(G > 0.0)) throw std::invalid_argument("synthetic_gradient_set: G must be positive");
  if (!(correlation >= 0.0 && correlation <= 1.0)) {
    throw std::invalid_argument("synthetic_gradient_set: correlation must be in [0, 1]");
  }
  RngStream cs = stream.child("common");
  const Vector c = unit_gaussian(D, cs);
  const double a = std::sqrt(correlation), b = std::sqrt(1.0 - correlation);
  GradientSet set;
  for (std::size_t k = 0; k < K; ++k) {
    RngStream ds = stream.child("device", k);
    const Vector e = unit_gaussian(D, ds);
    const double scale = G * (0.5 + 0.5 * ds.uniform());
    Vector g(D);
    double n2 = 0.0;
    for (std::size_t d = 0; d < D; ++d) {
      g[d] = a * c[d] + b * e[d];
      n2 += g[d] * g[d];
    }
    const double s = scale / std::sqrt(n2);
    for (auto& x : g) x *= s;
    set.targets.push_back(std::move(g));
  }
  return set;
}

std::string Variant::name() const {
  std::string n(to_string(strategy));
  if (impairment.quantization_bits > 0) n += "_q" + std::to_string(impairment.quantization_bits);
  if (impairment.uniform_noise_rad > 0.0) n += "_pn";
  return n;
}

std::string_view to_string(GradSource s) {
  return s == GradSource::FixedSynthetic ? "fixed_synthetic" : "recorded_training";
}

std::vector<MseEstimate> empirical_mse(const MseRequest& req, std::size_t workers) {
  check_trials(req.trials, "empirical_mse");
  req.config.validate();
  if (req.variants.empty()) throw std::invalid_argument("empirical_mse: no variants");
  if (req.pool.empty()) throw std::invalid_argument("empirical_mse: empty gradient pool");
  const std::size_t K = req.config.num_targets, M = req.config.num_interferers;
  if (req.beta.size() != K + M) throw std::invalid_argument("empirical_mse: need one beta per device");
  for (const auto& set : req.pool) {
    if (set.targets.size() != K) throw std::invalid_argument("empirical_mse: gradient set must hold K targets");
  }

  const analysis::GradientStats gstats = analysis::stats_of(req.pool);
  const double gp = gstats.global_power();
  if (!(gp > 0.0)) throw std::invalid_argument("empirical_mse: global gradient power must be positive");
  double mean_self = 0.0;
  for (double x : gstats.self_moment) mean_self += x / static_cast<double>(K);
  const std::size_t D = gstats.dimension;
  const double sigma2 = req.config.noise_variance();
  const std::size_t V = req.variants.size();

  auto make = [&] {
    AccVector a;
    a.items.resize(4 * V);
    return a;
  };
  const auto acc = run_blocks<AccVector>(req.trials, workers, make, [&](std::size_t t, AccVector& a) {
    const RngStream s = derive_stream(req.seed, {{"mse", req.point}, {"trial", t}});
    RngStream cs = s.child("channel");
    const auto realization = draw_realization(req.config, req.beta, cs);
    GradientSet grads;
    grads.targets = req.pool[t % req.pool.size()].targets;
    const Vector mean = ideal_round(grads);
    RngStream is = s.child("interference");
    grads.interferers =
        make_interference(req.interference, M, D, std::span<const double>(mean), is).signals;
    for (std::size_t v = 0; v < V; ++v) {
      const auto& var = req.variants[v];
      RngStream ps = s.child("plan");
      const auto plan = plan_round(var.strategy, req.config, realization, var.impairment, t, mean_self, D, ps);
      RngStream ns = s.child("noise");
      const auto r = ota_round(grads, realization, plan.phases, plan.params, sigma2, ns);
      a.items[4 * v].add(r.error.sq_norm / gp);
      a.items[4 * v + 1].add(r.error.computation_sq / gp);
      a.items[4 * v + 2].add(r.error.interference_sq / gp);
      a.items[4 * v + 3].add(r.error.noise_sq / gp);
    }
  });

  std::vector<MseEstimate> out;
  for (std::size_t v = 0; v < V; ++v) {
    MseEstimate e;
    e.variant = req.variants[v];
    e.total = acc.items[4 * v].mean();
    e.computation = acc.items[4 * v + 1].mean();
    e.interference = acc.items[4 * v + 2].mean();
    e.noise = acc.items[4 * v + 3].mean();
    e.global_power = gp;
    if (has_closed_form(e.variant.strategy) && e.variant.impairment.none()) {
      e.closed_form =
          analysis::closed_form_mse(scheme_id_of(e.variant.strategy), req.config, req.beta, gstats).scaled(1.0 / gp);
      e.total.attach(e.closed_form->total);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string_view to_string(Axis a) {
  switch (a) {
    case Axis::N: return "N";
    case Axis::P: return "P";
    case Axis::K: return "K";
    case Axis::M: return "M";
    case Axis::Bits: return "bits";
  }
  return "unknown";
}

std::optional<Axis> axis_from_string(std::string_view name) {
  for (auto a : {Axis::N, Axis::P, Axis::K, Axis::M, Axis::Bits}) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

void apply_axis(Axis axis, double value, SystemConfig& config, PhaseImpairment& impairment) {
  const auto bad = [&](const char* why) {
    return std::invalid_argument("axis " + std::string(to_string(axis)) + " value " + std::to_string(value) + ": " +
                                 why);
  };
  switch (axis) {
    case Axis::N:
      if (!is_integer(value) || value < 1) throw bad("must be an integer >= 1");
      config.ris_elements = static_cast<std::size_t>(value);
      break;
    case Axis::K:
      if (!is_integer(value) || value < 1) throw bad("must be an integer >= 1");
      config.num_targets = static_cast<std::size_t>(value);
      break;
    case Axis::M:
      if (!is_integer(value) || value < 0) throw bad("must be an integer >= 0");
      config.num_interferers = static_cast<std::size_t>(value);
      break;
    case Axis::P:
      if (!std::isfinite(value)) throw bad("must be finite (dBm)");
      config.target_power_w = dbm_to_watts(value);
      config.interferer_power_w = dbm_to_watts(value);
      break;
    case Axis::Bits:
      if (std::isinf(value) && value > 0) {
        impairment.quantization_bits = 0;
      } else if (is_integer(value) && value >= 1 && value <= 52) {
        impairment.quantization_bits = static_cast<int>(value);
      } else {
        throw bad("must be an integer in [1, 52] or +inf");
      }
      break;
  }
}

ResultTable sweep(const SweepRequest& req, std::size_t workers) {
  if (req.values.empty()) throw std::invalid_argument("sweep: no axis values");
  if (req.strategies.empty()) throw std::invalid_argument("sweep: no schemes");
  const bool recorded = req.source == GradSource::RecordedTraining;
  if (recorded && req.recorded.empty()) throw std::invalid_argument("sweep: recorded gradient pool is empty");
  if (recorded && req.axis == Axis::K) throw std::invalid_argument("sweep: the K axis needs synthetic gradients");
  ResultTable table;
  table.request = req;
  std::vector<double> values = req.values;
  std::sort(values.begin(), values.end());
  // Validate every value before spending time on any of them.
  for (double v : values) {
    SystemConfig c = req.base;
    PhaseImpairment imp = req.impairment;
    apply_axis(req.axis, v, c, imp);
    c.validate();
  }
  for (std::size_t r = 0; r < values.size(); ++r) {
    MseRequest m;
    m.config = req.base;
    PhaseImpairment imp = req.impairment;
    apply_axis(req.axis, values[r], m.config, imp);
    RngStream geo = derive_stream(req.seed, {{"geometry", 0}});
    m.beta = draw_geometry(m.config, geo);
    if (recorded) {
      m.pool = req.recorded;
    } else {
      RngStream gs = derive_stream(req.seed, {{"gradients", 0}});
      m.pool.push_back(synthetic_gradient_set(m.config.num_targets, req.dimension, m.config.gradient_bound,
                                              req.correlation, gs));
    }
    m.source = req.source;
    for (auto s : req.strategies) m.variants.push_back({s, imp});
    m.interference = req.interference;
    m.trials = req.trials;
    m.seed = req.seed;
    m.point = r;
    table.rows.push_back({values[r], empirical_mse(m, workers)});
  }
  return table;
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("loglog_slope: length mismatch");
  if (x.size() < 3) throw std::invalid_argument("loglog_slope: need at least 3 points");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw std::invalid_argument("loglog_slope: values must be positive and finite");
    }
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("loglog_slope: x values are all equal");
  return sxy / sxx;
}

double loglog_slope(const ResultTable& table, Strategy strategy, Metric metric) {
  std::vector<double> x, y;
  for (const auto& row : table.rows) {
    const auto it = std::find_if(row.entries.begin(), row.entries.end(),
                                 [&](const MseEstimate& e) { return e.variant.strategy == strategy; });
    if (it == row.entries.end()) throw std::invalid_argument("loglog_slope: scheme missing from table");
    double v = 0.0;
    switch (metric) {
      case Metric::Total: v = it->total.mean; break;
      case Metric::Computation: v = it->computation.mean; break;
      case Metric::Interference: v = it->interference.mean; break;
      case Metric::Noise: v = it->noise.mean; break;
      case Metric::ComputationPlusInterference: v = it->computation.mean + it->interference.mean; break;
    }
    x.push_back(row.axis_value);
    y.push_back(v);
  }
  return loglog_slope(x, y);
}

fl::Task build_task(const TaskSpec& spec, std::size_t K, std::uint64_t seed) {
  if (K == 0) throw std::invalid_argument("build_task: K must be >= 1");
  fl::Dataset train_pool, test;
  if (spec.dataset == "synthetic") {
    // One draw split into train and test so both share the class centres.
    const std::size_t n_train = K * spec.samples_per_client;
    RngStream ds = derive_stream(seed, {{"data", 0}});
    const fl::Dataset both = fl::synth_classification(n_train + spec.test_samples, spec.features, spec.classes,
                                                      spec.separation, ds);
    std::vector<std::size_t> tr(n_train), te(spec.test_samples);
    for (std::size_t i = 0; i < n_train; ++i) tr[i] = i;
    for (std::size_t i = 0; i < spec.test_samples; ++i) te[i] = n_train + i;
    train_pool = fl::subset(both, tr);
    test = fl::subset(both, te);
  } else if (spec.dataset == "mnist") {
    fl::Dataset full = fl::load_mnist(spec.mnist_dir, true);
    fl::Dataset full_test = fl::load_mnist(spec.mnist_dir, false);
    std::vector<std::size_t> idx(full.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    RngStream ss = derive_stream(seed, {{"data", 0}});
    shuffle(idx, ss);
    if (spec.samples_per_client > 0) idx.resize(std::min(idx.size(), K * spec.samples_per_client));
    std::sort(idx.begin(), idx.end());
    train_pool = fl::subset(full, idx);
    std::vector<std::size_t> te(std::min(full_test.size(), spec.test_samples));
    for (std::size_t i = 0; i < te.size(); ++i) te[i] = i;
    test = fl::subset(full_test, te);
  } else {
    throw std::invalid_argument("build_task: unknown dataset '" + spec.dataset + "'");
  }

  fl::Task task;
  RngStream ps = derive_stream(seed, {{"partition", 0}});
  const auto shards = fl::partition_noniid_indices(train_pool, K, spec.labels_per_client, ps);
  std::vector<std::size_t> all;
  for (const auto& s : shards) {
    task.shards.push_back(fl::subset(train_pool, s));
    all.insert(all.end(), s.begin(), s.end());
  }
  task.train = fl::subset(train_pool, all);
  task.test = std::move(test);
  fl::ModelDims dims{spec.model, train_pool.num_features, spec.hidden, train_pool.num_classes};
  RngStream is = derive_stream(seed, {{"init", 0}});
  task.initial = fl::init_model(dims, is);
  return task;
}

std::vector<GradientSet> record_gradients(const fl::Task& task, std::size_t rounds, double learning_rate,
                                          std::size_t batch_size, double gradient_bound, std::uint64_t seed) {
  std::vector<GradientSet> out;
  fl::Model model = task.initial;
  for (std::size_t t = 0; t < rounds; ++t) {
    GradientSet grads;
    for (std::size_t k = 0; k < task.shards.size(); ++k) {
      RngStream bs = derive_stream(seed, {{"batch", t}, {"client", k}});
      grads.targets.push_back(
          fl::clip_gradient(fl::local_gradient(model, task.shards[k], batch_size, bs), gradient_bound));
    }
    model = fl::sgd_step(model, ideal_round(grads), learning_rate);
    out.push_back(std::move(grads));
  }
  return out;
}

ConvergenceResult compare_convergence(const ConvergenceRequest& req, std::size_t workers) {
  if (req.seeds.empty()) throw std::invalid_argument("compare_convergence: at least one seed required");
  if (req.runs.empty()) throw std::invalid_argument("compare_convergence: no runs");
  const std::size_t K = req.runs.front().system.num_targets;
  for (const auto& r : req.runs) {
    if (r.system.num_targets != K) throw std::invalid_argument("compare_convergence: runs must share K");
    r.system.validate();
  }

  const std::size_t S = req.seeds.size(), R = req.runs.size();
  std::vector<fl::Task> tasks(S);
  ConvergenceResult result;
  result.gradient_bounds.resize(S);
  parallel_for(S, workers, [&](std::size_t i) {
    tasks[i] = build_task(req.task, K, req.seeds[i]);
    if (req.gradient_bound) {
      result.gradient_bounds[i] = *req.gradient_bound;
    } else {
      const auto& r0 = req.runs.front();
      result.gradient_bounds[i] =
          fl::run_pilot(tasks[i], req.pilot_rounds, r0.learning_rate, r0.batch_size, req.seeds[i]).gradient_bound;
    }
  });

  result.traces.resize(R * S);
  parallel_for(R * S, workers, [&](std::size_t j) {
    const std::size_t r = j / S, i = j % S;
    fl::RunConfig cfg = req.runs[r];
    cfg.system.gradient_bound = result.gradient_bounds[i];
    RngStream geo = derive_stream(req.seeds[i], {{"geometry", 0}});
    const auto beta = draw_geometry(cfg.system, geo);
    result.traces[j] = fl::train(cfg, tasks[i], beta, req.seeds[i]);
  });

  for (std::size_t r = 0; r < R; ++r) {
    std::vector<double> finals;
    for (std::size_t i = 0; i < S; ++i) finals.push_back(result.traces[r * S + i].records.back().test_accuracy);
    ConvergenceSummary s;
    s.label = req.runs[r].label;
    for (double f : finals) s.mean_final_accuracy += f / static_cast<double>(S);
    if (S > 1) {
      double ss = 0.0;
      for (double f : finals) ss += (f - s.mean_final_accuracy) * (f - s.mean_final_accuracy);
      s.sd_final_accuracy = std::sqrt(ss / static_cast<double>(S - 1));
    }
    result.summary.push_back(s);
  }
  return result;
}

BoundReport evaluate_bound(const TaskSpec& spec, SystemConfig config, std::size_t pilot_rounds,
                           double learning_rate, std::size_t batch_size, std::size_t rounds, std::uint64_t seed) {
  const fl::Task task = build_task(spec, config.num_targets, seed);
  BoundReport rep;
  rep.pilot = fl::run_pilot(task, pilot_rounds, learning_rate, batch_size, seed);
  rep.dimension = task.initial.weights.size();
  rep.rounds = rounds;
  config.gradient_bound = rep.pilot.gradient_bound;
  config.validate();
  RngStream geo = derive_stream(seed, {{"geometry", 0}});
  const auto beta = draw_geometry(config, geo);
  const auto& p = rep.pilot;
  rep.scheme1 = analysis::convergence_bound(SchemeId::SchemeI, config, beta, p.smoothness, p.dissimilarity,
                                            p.sgd_variance, rounds, p.loss_gap, rep.dimension);
  rep.scheme2 = analysis::convergence_bound(SchemeId::SchemeII, config, beta, p.smoothness, p.dissimilarity,
                                            p.sgd_variance, rounds, p.loss_gap, rep.dimension);
  return rep;
}

}  // namespace airfl::harness
