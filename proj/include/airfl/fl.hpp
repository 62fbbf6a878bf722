#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "airfl/aggregator.hpp"
#include "airfl/aircomp.hpp"
#include "airfl/channel.hpp"
#include "airfl/rng.hpp"

namespace airfl::fl {

// n samples of d features (row-major) with labels in [0, C).
struct Dataset {
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::string name;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  // Throws std::invalid_argument if shapes disagree, n == 0 or a label is out of range.
  void validate() const;
};

Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

// Gaussian blobs with unit variance per feature. Class c is centred at
// `separation` along its own direction: e_c when d >= C, otherwise a random
// unit vector. separation == 0 makes every class identical.
Dataset synth_classification(std::size_t n, std::size_t d, std::size_t C, double separation, RngStream& stream);

// Index sets of K non-IID shards. Each shard gets labels_per_client label
// slots holding min(labels_per_client, classes) distinct labels: a random
// label permutation laid out cyclically, then randomly swapped between
// shards where that keeps labels distinct.
// Every label's samples are split evenly across its slots and shards are
// truncated to the smallest shard, so all shards have equal size.
std::vector<std::vector<std::size_t>> partition_noniid_indices(const Dataset& data, std::size_t K,
                                                               std::size_t labels_per_client, RngStream& stream);
std::vector<Dataset> partition_noniid(const Dataset& data, std::size_t K, std::size_t labels_per_client,
                                      RngStream& stream);

// IDX (MNIST layout) reading. Images are scaled to [0, 1].
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};
IdxArray read_idx(const std::filesystem::path& path, std::uint8_t expected_rank);
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
// train-{images,labels} or t10k-{images,labels} files under `dir`. A missing
// file produces an error naming both expected files.
Dataset load_mnist(const std::filesystem::path& dir, bool train);

enum class ModelKind { SoftmaxRegression, MlpOneHidden };
std::string_view to_string(ModelKind kind);
std::optional<ModelKind> model_kind_from_string(std::string_view name);

struct ModelDims {
  ModelKind kind = ModelKind::SoftmaxRegression;
  std::size_t inputs = 0;
  std::size_t hidden = 0;  // MLP only
  std::size_t classes = 0;

  [[nodiscard]] std::size_t parameter_count() const;
};

// Flattened parameters. Softmax: [W (C x d), b (C)].
// MLP: [W1 (H x d), b1 (H), W2 (C x H), b2 (C)], tanh hidden layer.
struct Model {
  ModelDims dims;
  Vector weights;
};

// Softmax starts at zero; the MLP draws W1 ~ N(0, 1/d), W2 ~ N(0, 1/H).
Model init_model(const ModelDims& dims, RngStream& stream);

double loss(const Model& model, const Dataset& data);
double accuracy(const Model& model, const Dataset& data);
// Mean cross-entropy gradient over the given rows.
Vector batch_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> rows);
Vector full_gradient(const Model& model, const Dataset& data);
// Gradient over a mini-batch drawn uniformly without replacement.
Vector local_gradient(const Model& model, const Dataset& shard, std::size_t batch_size, RngStream& stream);

Vector clip_gradient(std::span<const double> g, double bound);
Model sgd_step(const Model& model, std::span<const double> g_hat, double eta);

double norm(std::span<const double> v);

// Aggregation used by a training run. nullopt strategy means ideal averaging.
struct AggregatorConfig {
  std::optional<Strategy> strategy;
  PhaseImpairment impairment;
  InterferenceMode interference = InterferenceMode::ZeroGradientAttack;

  [[nodiscard]] std::string name() const;
};

struct RunConfig {
  std::string label;
  SystemConfig system;
  AggregatorConfig aggregator;
  std::size_t rounds = 300;
  double learning_rate = 0.005;
  std::size_t batch_size = 50;
};

struct RoundRecord {
  std::size_t round = 0;
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  double grad_norm = 0.0;  // ||g_t|| of the ideal average
  double error_sq = 0.0;   // ||g_hat - g_t||^2
};

struct RunTrace {
  std::string label;
  std::string scheme;
  std::size_t ris_elements = 0;
  std::uint64_t seed = 0;
  std::vector<RoundRecord> records;
};

// Everything a run shares with the other runs it is compared against.
struct Task {
  std::vector<Dataset> shards;
  Dataset train;  // union of the shards
  Dataset test;
  Model initial;
};

// Runs `config.rounds` rounds of local SGD gradients, clipping to G,
// aggregation and a global step. `beta` is the fixed geometry (one entry per
// device; ignored by ideal aggregation). Per-round randomness is keyed on
// (seed, round, client), so runs sharing a task and seed see the same
// mini-batches until their models diverge.
RunTrace train(const RunConfig& config, const Task& task, std::span<const double> beta, std::uint64_t seed);

// Constants measured on an ideal-aggregation pilot run without clipping.
struct PilotStats {
  std::vector<double> local_norms;  // every ||g_k|| seen
  double gradient_bound = 0.0;      // 99th percentile of local_norms
  double smoothness = 0.0;          // max ||grad F(w') - grad F(w)|| / ||w' - w||
  double dissimilarity = 0.0;       // max_t max_k ||grad F_k|| / ||grad F||
  double sgd_variance = 0.0;        // mean E||g_k - grad F_k||^2
  double loss_gap = 0.0;            // F(w_0) - min_t F(w_t)
};
PilotStats run_pilot(const Task& task, std::size_t rounds, double learning_rate, std::size_t batch_size,
                     std::uint64_t seed);

double percentile(std::vector<double> values, double q);

}  // namespace airfl::fl
