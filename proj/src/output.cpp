#include "airfl/output.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace airfl::output {
namespace {

void row(std::string& out, std::initializer_list<std::string> cells) {
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
}

std::string closed_or_na(const std::optional<analysis::MseBreakdown>& cf, double analysis::MseBreakdown::*field) {
  return cf ? format_double((*cf).*field) : std::string("NA");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return {buf, res.ptr};
}

std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

std::string moments_csv(const std::vector<std::pair<std::string, harness::CoefficientMoments>>& results) {
  std::string out;
  row(out, {"scheme", "role", "device", "mean", "mean_target", "mean_stderr", "mean_z", "variance", "variance_target",
            "variance_stderr", "variance_z"});
  for (const auto& [scheme, m] : results) {
    auto emit = [&](const char* role, const std::vector<harness::MomentEstimate>& mean,
                    const std::vector<harness::MomentEstimate>& var) {
      for (std::size_t i = 0; i < mean.size(); ++i) {
        row(out, {scheme, role, std::to_string(i), format_double(mean[i].mean), format_optional(mean[i].target),
                  format_double(mean[i].std_error), format_optional(mean[i].z_score), format_double(var[i].mean),
                  format_optional(var[i].target), format_double(var[i].std_error), format_optional(var[i].z_score)});
      }
    };
    emit("target", m.target_mean, m.target_variance);
    emit("interferer", m.interferer_mean, m.interferer_variance);
  }
  return out;
}

std::string mse_table_csv(const harness::ResultTable& table) {
  std::string out;
  row(out, {"axis", "scheme", "empirical", "closed_form", "stderr", "computation", "interference", "noise",
            "closed_computation", "closed_interference", "closed_noise"});
  using B = analysis::MseBreakdown;
  for (const auto& r : table.rows) {
    for (const auto& e : r.entries) {
      row(out, {format_double(r.axis_value), e.variant.name(), format_double(e.total.mean),
                closed_or_na(e.closed_form, &B::total), format_double(e.total.std_error),
                format_double(e.computation.mean), format_double(e.interference.mean), format_double(e.noise.mean),
                closed_or_na(e.closed_form, &B::computation), closed_or_na(e.closed_form, &B::interference),
                closed_or_na(e.closed_form, &B::noise)});
    }
  }
  return out;
}

std::string trace_csv(const fl::RunTrace& trace) {
  std::string out;
  row(out, {"round", "train_loss", "test_accuracy", "grad_norm", "error_sq"});
  for (const auto& r : trace.records) {
    row(out, {std::to_string(r.round), format_double(r.train_loss), format_double(r.test_accuracy),
              format_double(r.grad_norm), format_double(r.error_sq)});
  }
  return out;
}

std::string convergence_summary_csv(const harness::ConvergenceResult& result,
                                    const std::vector<fl::RunConfig>& runs) {
  std::string out;
  row(out, {"label", "scheme", "seeds", "mean_final_accuracy", "sd_final_accuracy"});
  const std::size_t seeds = result.gradient_bounds.size();
  for (std::size_t r = 0; r < result.summary.size(); ++r) {
    const auto& s = result.summary[r];
    row(out, {s.label, runs.at(r).aggregator.name(), std::to_string(seeds), format_double(s.mean_final_accuracy),
              format_double(s.sd_final_accuracy)});
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("error writing " + path.string());
}

}  // namespace airfl::output
