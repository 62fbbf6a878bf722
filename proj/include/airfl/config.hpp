#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "airfl/aggregator.hpp"
#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"
#include "airfl/fl.hpp"
#include "airfl/harness.hpp"

namespace airfl::config {

inline constexpr int kSchemaVersion = 1;

// Parse or validation failure. what() carries "source:line: message".
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradientSettings {
  harness::GradSource source = harness::GradSource::FixedSynthetic;
  std::size_t dimension = 100;  // fixed_synthetic only
  double correlation = 0.5;     // fixed_synthetic only
  std::size_t record_rounds = 50;  // recorded_training: ideal rounds recorded
};

struct SweepSettings {
  harness::Axis axis = harness::Axis::N;
  std::vector<double> values;
};

struct TrainSettings {
  harness::TaskSpec task;
  std::size_t rounds = 300;
  double learning_rate = 0.005;
  std::size_t batch_size = 50;
  std::optional<double> gradient_bound;  // nullopt: measured by a pilot run
  std::size_t pilot_rounds = 50;
  std::vector<fl::RunConfig> runs;       // fully resolved
};

struct BoundSettings {
  std::size_t rounds = 300;
  std::size_t pilot_rounds = 50;
};

struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  SystemConfig system;
  std::vector<Strategy> schemes;
  PhaseImpairment phase;
  InterferenceMode interference = InterferenceMode::RandomUnit;
  std::size_t trials = 100000;
  std::vector<std::uint64_t> seeds{1};
  GradientSettings gradients;
  SweepSettings sweep;
  TrainSettings train;
  BoundSettings bound;
  std::string output_dir = "out";
};

// Parses and validates a config document. `source` names the document in
// error messages. Unknown keys, wrong types and out-of-range values are
// rejected with the line of the offending key.
ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved form (SI units); parse_config accepts it back unchanged.
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const SystemConfig& config);

// Line of every object key, keyed by JSON pointer ("/system/ris_elements").
std::vector<std::pair<std::string, int>> key_lines(const std::string& text);

}  // namespace airfl::config
