#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airfl/aggregator.hpp"
#include "airfl/aircomp.hpp"
#include "airfl/analysis.hpp"
#include "airfl/channel.hpp"
#include "airfl/fl.hpp"
#include "airfl/parallel.hpp"

namespace airfl::harness {

inline constexpr std::size_t kMinTrials = 1000;

struct MomentEstimate {
  double mean = 0.0;
  double variance = 0.0;   // sample variance of the averaged quantity
  double std_error = 0.0;  // sqrt(variance / trials)
  std::size_t trials = 0;
  std::optional<double> target;
  std::optional<double> z_score;  // (mean - target) / std_error

  void attach(double t);
  // Passes if |mean - target| <= max(rel * |target|, k * std_error).
  [[nodiscard]] bool within(double rel, double k) const;
};

// Shifted power sums for mean, variance and the standard error of both.
// Blocks of trials fill their own accumulator; merging in block order keeps
// results independent of scheduling.
class Accumulator {
 public:
  explicit Accumulator(double shift = 0.0) : shift_(shift) {}
  void add(double x);
  void merge(const Accumulator& other);
  [[nodiscard]] std::size_t count() const { return n_; }
  [[nodiscard]] MomentEstimate mean() const;
  // Sample variance, with a delta-method standard error.
  [[nodiscard]] MomentEstimate variance() const;

 private:
  double shift_;
  std::size_t n_ = 0;
  KahanSum s1_, s2_, s3_, s4_;
};

// Trial blocks of this size are the unit of parallel work.
inline constexpr std::size_t kBlockSize = 512;

struct CoefficientMoments {
  std::vector<MomentEstimate> target_mean;
  std::vector<MomentEstimate> target_variance;
  std::vector<MomentEstimate> interferer_mean;
  std::vector<MomentEstimate> interferer_variance;

  // Largest |z| among entries that carry a target.
  [[nodiscard]] double max_abs_z() const;
};

struct MomentRequest {
  SystemConfig config;
  std::vector<double> beta;
  Strategy strategy = Strategy::SchemeI;
  PhaseImpairment impairment;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  std::size_t dimension = 100;  // only used by the min-MSE denoiser
  double lambda_scale = 1.0;    // multiplies lambda; != 1 is a deliberate fault
};

// E[l] and V[l] of every aggregation and interference coefficient, with
// targets: 1/K and 0 for the means (Schemes I/II, round robin averaged over
// rounds, random phases give 0), and the closed-form variances for Schemes
// I/II and random phases. Trial t uses round t for round-robin scheduling.
CoefficientMoments estimate_coefficient_moments(const MomentRequest& request, std::size_t workers);

// Raw moments of u under weighted alignment with one extra non-aligned
// device, targets attached from the analysis module.
struct UMoments {
  std::vector<MomentEstimate> mean;                 // E[u_k]
  std::vector<MomentEstimate> second;               // E[u_k^2]
  std::vector<std::vector<MomentEstimate>> cross;   // E[u_k u_k'], k < k'
  MomentEstimate interferer_second;                 // E[u_m^2]
  MomentEstimate interferer_cross;                  // E[u_k u_m] for k = 0, target 0
};
UMoments estimate_u_moments(std::size_t N, std::span<const double> w, std::size_t trials, std::uint64_t seed,
                            std::size_t workers);

// K target gradients with norms in [G/2, G]. Each is a unit mix
// sqrt(rho) c + sqrt(1 - rho) e_k of a common direction c and a private
// direction e_k, so rho controls cross-correlation. Device k uses its own
// substream, so growing K keeps existing gradients.
GradientSet synthetic_gradient_set(std::size_t K, std::size_t D, double G, double correlation, RngStream& stream);

// One transmission variant evaluated in an MSE experiment.
struct Variant {
  Strategy strategy = Strategy::SchemeI;
  PhaseImpairment impairment;

  [[nodiscard]] std::string name() const;
};

enum class GradSource { FixedSynthetic, RecordedTraining };
std::string_view to_string(GradSource s);

struct MseRequest {
  SystemConfig config;
  std::vector<double> beta;
  std::vector<Variant> variants;
  InterferenceMode interference = InterferenceMode::RandomUnit;
  GradSource source = GradSource::FixedSynthetic;
  // Target gradients; trial t uses pool[t % pool.size()]. One set for
  // fixed_synthetic, a recorded stream for recorded_training.
  std::vector<GradientSet> pool;
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
  std::uint64_t point = 0;  // grid point, part of every trial's stream path
};

// Everything is normalized by the global gradient power E||g_t||^2.
struct MseEstimate {
  Variant variant;
  MomentEstimate total;
  MomentEstimate computation;
  MomentEstimate interference;
  MomentEstimate noise;
  // Schemes I/II with ideal phases only.
  std::optional<analysis::MseBreakdown> closed_form;
  double global_power = 0.0;
};

// All variants of a trial share the channel realization, interference and
// noise draw (common random numbers).
std::vector<MseEstimate> empirical_mse(const MseRequest& request, std::size_t workers);

enum class Axis { N, P, K, M, Bits };
std::string_view to_string(Axis a);
std::optional<Axis> axis_from_string(std::string_view name);

struct SweepRequest {
  Axis axis = Axis::N;
  std::vector<double> values;  // P in dBm; bits = +inf means continuous phases
  SystemConfig base;
  std::vector<Strategy> strategies;
  PhaseImpairment impairment;
  InterferenceMode interference = InterferenceMode::RandomUnit;
  GradSource source = GradSource::FixedSynthetic;
  std::size_t dimension = 100;     // fixed_synthetic
  double correlation = 0.5;        // fixed_synthetic
  std::vector<GradientSet> recorded;  // recorded_training pool (fixed K)
  std::size_t trials = 100000;
  std::uint64_t seed = 1;
};

struct ResultRow {
  double axis_value = 0.0;
  std::vector<MseEstimate> entries;  // one per strategy, request order
};

// The request is the config snapshot: rerunning it reproduces the table.
struct ResultTable {
  SweepRequest request;
  std::vector<ResultRow> rows;  // ascending axis value
};

// Applies one axis value to a config (and impairment for the bits axis).
void apply_axis(Axis axis, double value, SystemConfig& config, PhaseImpairment& impairment);

// Geometry is drawn from (seed, "geometry") with per-device substreams and
// the gradient set from (seed, "gradients").
ResultTable sweep(const SweepRequest& request, std::size_t workers);

enum class Metric { Total, Computation, Interference, Noise, ComputationPlusInterference };

// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);
// Slope of an empirical metric for one strategy across the table's rows.
double loglog_slope(const ResultTable& table, Strategy strategy, Metric metric);

// Shared learning task of a convergence comparison.
struct TaskSpec {
  std::string dataset = "synthetic";  // or "mnist"
  std::string mnist_dir;
  std::size_t samples_per_client = 100;
  std::size_t test_samples = 1000;
  std::size_t features = 20;
  std::size_t classes = 10;
  double separation = 3.0;
  std::size_t labels_per_client = 2;
  fl::ModelKind model = fl::ModelKind::SoftmaxRegression;
  std::size_t hidden = 32;
};

fl::Task build_task(const TaskSpec& spec, std::size_t K, std::uint64_t seed);

// Clipped local gradients of an ideal-aggregation run, one set per round.
std::vector<GradientSet> record_gradients(const fl::Task& task, std::size_t rounds, double learning_rate,
                                          std::size_t batch_size, double gradient_bound, std::uint64_t seed);

struct ConvergenceRequest {
  TaskSpec task;
  std::vector<fl::RunConfig> runs;
  std::vector<std::uint64_t> seeds;
  // nullopt: measure G per seed as the 99th percentile of a pilot run.
  std::optional<double> gradient_bound;
  std::size_t pilot_rounds = 50;
};

struct ConvergenceSummary {
  std::string label;
  double mean_final_accuracy = 0.0;
  double sd_final_accuracy = 0.0;
};

struct ConvergenceResult {
  std::vector<fl::RunTrace> traces;  // run-major, then seed
  std::vector<ConvergenceSummary> summary;
  std::vector<double> gradient_bounds;  // per seed
};

// Runs every config on every seed. Runs of one seed share the data
// partition, initial model, geometry and G; only the aggregator differs.
ConvergenceResult compare_convergence(const ConvergenceRequest& request, std::size_t workers);

struct BoundReport {
  fl::PilotStats pilot;
  std::size_t dimension = 0;
  std::size_t rounds = 0;
  analysis::ConvergenceBound scheme1;
  analysis::ConvergenceBound scheme2;
};

// Measures L, xi, chi^2, G and the loss gap on a pilot run and evaluates the
// convergence bound of both schemes at `rounds`.
BoundReport evaluate_bound(const TaskSpec& spec, SystemConfig config, std::size_t pilot_rounds,
                           double learning_rate, std::size_t batch_size, std::size_t rounds, std::uint64_t seed);

}  // namespace airfl::harness
