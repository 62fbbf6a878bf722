#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "airfl/fl.hpp"
#include "airfl/harness.hpp"

namespace airfl::output {

// Shortest decimal that parses back to the same double; "inf"/"-inf"/"nan"
// for non-finite values.
std::string format_double(double v);
// format_double, or "NA" when absent.
std::string format_optional(const std::optional<double>& v);

// scheme,role,device,mean,mean_target,mean_stderr,mean_z,
// variance,variance_target,variance_stderr,variance_z
// One row per device (targets then interferers) per scheme.
std::string moments_csv(const std::vector<std::pair<std::string, harness::CoefficientMoments>>& results);

// axis,scheme,empirical,closed_form,stderr,computation,interference,noise,
// closed_computation,closed_interference,closed_noise
// Normalized MSE; closed-form cells are NA where no closed form exists.
std::string mse_table_csv(const harness::ResultTable& table);

// round,train_loss,test_accuracy,grad_norm,error_sq
std::string trace_csv(const fl::RunTrace& trace);

// label,scheme,seeds,mean_final_accuracy,sd_final_accuracy
std::string convergence_summary_csv(const harness::ConvergenceResult& result,
                                    const std::vector<fl::RunConfig>& runs);

// Writes `content` to `path`, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace airfl::output
