// airfl_sim: command-line driver for moment checks, MSE sweeps, training
// comparisons and convergence-bound evaluation.
//
// Exit codes: 0 success, 1 --check failure, 2 usage or config error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "airfl/config.hpp"
#include "airfl/harness.hpp"
#include "airfl/output.hpp"

namespace {

using namespace airfl;
using nlohmann::json;

constexpr int kExitCheck = 1;
constexpr int kExitUsage = 2;
constexpr double kCheckZ = 4.0;

struct Options {
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::size_t trials = 0;
  std::size_t workers = 0;
  bool check = false;
  double lambda_scale = 1.0;
};

struct Loaded {
  config::ExperimentConfig cfg;
  std::filesystem::path out;
  std::size_t workers = 1;
};

Loaded load(const Options& o) {
  Loaded l{config::load_config(o.config_path), {}, resolve_workers(o.workers ? std::optional(o.workers) : std::nullopt)};
  if (!o.seeds.empty()) l.cfg.seeds = o.seeds;
  if (o.trials) {
    if (o.trials < harness::kMinTrials) {
      throw config::ConfigError("--trials: at least " + std::to_string(harness::kMinTrials) + " trials required");
    }
    l.cfg.trials = o.trials;
  }
  l.out = o.out_dir.empty() ? std::filesystem::path(l.cfg.output_dir) : std::filesystem::path(o.out_dir);
  return l;
}

std::string sidecar(const char* command, const config::ExperimentConfig& cfg, std::uint64_t seed, json extra = {}) {
  json j{{"command", command}, {"seed", seed}, {"config", config::to_json(cfg)}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  return j.dump(2) + "\n";
}

std::vector<double> geometry(const SystemConfig& sys, std::uint64_t seed) {
  RngStream geo = derive_stream(seed, {{"geometry", 0}});
  return draw_geometry(sys, geo);
}

int cmd_moments(const Options& o) {
  const auto l = load(o);
  bool failed = false;
  for (auto seed : l.cfg.seeds) {
    const auto beta = geometry(l.cfg.system, seed);
    std::vector<std::pair<std::string, harness::CoefficientMoments>> results;
    for (auto s : l.cfg.schemes) {
      harness::MomentRequest req;
      req.config = l.cfg.system;
      req.beta = beta;
      req.strategy = s;
      req.impairment = l.cfg.phase;
      req.trials = l.cfg.trials;
      req.seed = seed;
      req.dimension = l.cfg.gradients.dimension;
      req.lambda_scale = o.lambda_scale;
      auto m = harness::estimate_coefficient_moments(req, l.workers);
      const double z = m.max_abs_z();
      if (o.check && z > kCheckZ) {
        std::cerr << "check failed: " << to_string(s) << " seed " << seed << " has |z| = " << z << " > " << kCheckZ
                  << "\n";
        failed = true;
      }
      results.emplace_back(std::string(to_string(s)), std::move(m));
    }
    const std::string stem = "moments_seed" + std::to_string(seed);
    output::write_file(l.out / (stem + ".csv"), output::moments_csv(results));
    json extra{{"trials", l.cfg.trials}};
    if (o.lambda_scale != 1.0) extra["lambda_scale"] = o.lambda_scale;
    output::write_file(l.out / (stem + ".json"), sidecar("moments", l.cfg, seed, extra));
    std::cout << "wrote " << (l.out / (stem + ".csv")).string() << "\n";
  }
  return failed ? kExitCheck : 0;
}

int cmd_mse_sweep(const Options& o) {
  const auto l = load(o);
  if (l.cfg.sweep.values.empty()) throw config::ConfigError(o.config_path + ": /sweep: axis values are required");
  bool failed = false;
  for (auto seed : l.cfg.seeds) {
    harness::SweepRequest req;
    req.axis = l.cfg.sweep.axis;
    req.values = l.cfg.sweep.values;
    req.base = l.cfg.system;
    req.strategies = l.cfg.schemes;
    req.impairment = l.cfg.phase;
    req.interference = l.cfg.interference;
    req.source = l.cfg.gradients.source;
    req.dimension = l.cfg.gradients.dimension;
    req.correlation = l.cfg.gradients.correlation;
    req.trials = l.cfg.trials;
    req.seed = seed;
    json extra{{"axis_name", std::string(harness::to_string(req.axis))}, {"trials", req.trials}};
    if (req.source == harness::GradSource::RecordedTraining) {
      const auto& ts = l.cfg.train;
      const auto task = harness::build_task(ts.task, l.cfg.system.num_targets, seed);
      const double G = ts.gradient_bound
                           ? *ts.gradient_bound
                           : fl::run_pilot(task, ts.pilot_rounds, ts.learning_rate, ts.batch_size, seed).gradient_bound;
      req.base.gradient_bound = G;
      req.recorded =
          harness::record_gradients(task, l.cfg.gradients.record_rounds, ts.learning_rate, ts.batch_size, G, seed);
      extra["gradient_bound"] = G;
    }
    const auto table = harness::sweep(req, l.workers);
    if (o.check) {
      for (const auto& r : table.rows) {
        for (const auto& e : r.entries) {
          if (e.total.z_score && std::abs(*e.total.z_score) > kCheckZ) {
            std::cerr << "check failed: " << e.variant.name() << " at " << output::format_double(r.axis_value)
                      << ": empirical vs closed form |z| = " << std::abs(*e.total.z_score) << "\n";
            failed = true;
          }
        }
      }
    }
    const std::string stem = "mse_" + std::string(harness::to_string(req.axis)) + "_seed" + std::to_string(seed);
    output::write_file(l.out / (stem + ".csv"), output::mse_table_csv(table));
    output::write_file(l.out / (stem + ".json"), sidecar("mse-sweep", l.cfg, seed, extra));
    std::cout << "wrote " << (l.out / (stem + ".csv")).string() << "\n";
  }
  return failed ? kExitCheck : 0;
}

std::vector<fl::RunConfig> default_runs(const config::ExperimentConfig& cfg) {
  std::vector<fl::RunConfig> runs;
  auto add = [&](std::optional<Strategy> s) {
    fl::RunConfig r;
    r.aggregator.strategy = s;
    r.aggregator.interference = cfg.interference;
    r.aggregator.impairment = cfg.phase;
    r.label = r.aggregator.name();
    r.system = cfg.system;
    r.rounds = cfg.train.rounds;
    r.learning_rate = cfg.train.learning_rate;
    r.batch_size = cfg.train.batch_size;
    runs.push_back(r);
  };
  add(std::nullopt);
  for (auto s : cfg.schemes) add(s);
  return runs;
}

int cmd_train(const Options& o) {
  const auto l = load(o);
  harness::ConvergenceRequest req;
  req.task = l.cfg.train.task;
  req.runs = l.cfg.train.runs.empty() ? default_runs(l.cfg) : l.cfg.train.runs;
  req.seeds = l.cfg.seeds;
  req.gradient_bound = l.cfg.train.gradient_bound;
  req.pilot_rounds = l.cfg.train.pilot_rounds;
  const auto res = harness::compare_convergence(req, l.workers);
  const std::size_t S = req.seeds.size();
  for (std::size_t r = 0; r < req.runs.size(); ++r) {
    for (std::size_t i = 0; i < S; ++i) {
      const auto& tr = res.traces[r * S + i];
      const auto name = "trace_" + tr.label + "_seed" + std::to_string(tr.seed) + ".csv";
      output::write_file(l.out / name, output::trace_csv(tr));
    }
  }
  output::write_file(l.out / "summary.csv", output::convergence_summary_csv(res, req.runs));
  json bounds = json::array();
  for (std::size_t i = 0; i < S; ++i) bounds.push_back({{"seed", req.seeds[i]}, {"gradient_bound", res.gradient_bounds[i]}});
  json j{{"command", "train"}, {"seeds", req.seeds}, {"gradient_bounds", bounds}, {"config", config::to_json(l.cfg)}};
  output::write_file(l.out / "train.json", j.dump(2) + "\n");
  for (const auto& s : res.summary) {
    std::cout << s.label << ": final accuracy " << output::format_double(s.mean_final_accuracy) << " +- "
              << output::format_double(s.sd_final_accuracy) << "\n";
  }
  return 0;
}

json bound_json(const analysis::ConvergenceBound& b) {
  return {{"varpi", b.varpi}, {"epsilon_bias", b.epsilon_bias}, {"bound_at_T", b.bound_at_T}};
}

int cmd_bound(const Options& o) {
  const auto l = load(o);
  const auto& ts = l.cfg.train;
  bool failed = false;
  for (auto seed : l.cfg.seeds) {
    const auto rep = harness::evaluate_bound(ts.task, l.cfg.system, l.cfg.bound.pilot_rounds, ts.learning_rate,
                                             ts.batch_size, l.cfg.bound.rounds, seed);
    const bool ordered = rep.scheme1.varpi <= rep.scheme2.varpi;
    if (o.check && !ordered) {
      std::cerr << "check failed: varpi_I > varpi_II for seed " << seed << "\n";
      failed = true;
    }
    json j{{"command", "bound"},
           {"seed", seed},
           {"rounds", rep.rounds},
           {"dimension", rep.dimension},
           {"measured",
            {{"smoothness", rep.pilot.smoothness},
             {"dissimilarity", rep.pilot.dissimilarity},
             {"sgd_variance", rep.pilot.sgd_variance},
             {"gradient_bound", rep.pilot.gradient_bound},
             {"loss_gap", rep.pilot.loss_gap}}},
           {"scheme1", bound_json(rep.scheme1)},
           {"scheme2", bound_json(rep.scheme2)},
           {"varpi_scheme1_le_scheme2", ordered},
           {"config", config::to_json(l.cfg)}};
    const auto text = j.dump(2) + "\n";
    output::write_file(l.out / ("bound_seed" + std::to_string(seed) + ".json"), text);
    std::cout << text;
  }
  return failed ? kExitCheck : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Over-the-air federated learning simulator with surface-aided aggregation"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seeds", o.seeds, "Comma-separated master seeds")->delimiter(',');
    sub->add_option("--trials", o.trials, "Monte Carlo trials (overrides trials)");
    sub->add_option("--workers", o.workers, "Worker threads (default: AIRFL_SIM_WORKERS or all cores)");
    sub->add_flag("--check", o.check, "Exit 1 when a self-check fails");
  };
  auto* moments = app.add_subcommand("moments", "Estimate aggregation/interference coefficient moments");
  add_common(moments);
  moments->add_option("--lambda-scale", o.lambda_scale, "Multiply lambda (fault injection for --check)")
      ->check(CLI::PositiveNumber);
  auto* mse = app.add_subcommand("mse-sweep", "Normalized MSE over one axis");
  add_common(mse);
  auto* train = app.add_subcommand("train", "Compare training runs across aggregators");
  add_common(train);
  auto* bound = app.add_subcommand("bound", "Evaluate the convergence bound from a pilot run");
  add_common(bound);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (moments->parsed()) return cmd_moments(o);
    if (mse->parsed()) return cmd_mse_sweep(o);
    if (train->parsed()) return cmd_train(o);
    if (bound->parsed()) return cmd_bound(o);
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
