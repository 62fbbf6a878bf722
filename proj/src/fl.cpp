#include "airfl/fl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace airfl::fl {
namespace {

void check_model(const Model& model) {
  if (model.weights.size() != model.dims.parameter_count()) {
    throw std::invalid_argument("model weight length does not match its dimensions");
  }
}

void check_compatible(const Model& model, const Dataset& data) {
  check_model(model);
  if (data.num_features != model.dims.inputs || data.num_classes > model.dims.classes) {
    throw std::invalid_argument("dataset shape does not match the model");
  }
}

// Logits for one sample; `hidden` receives the tanh activations of the MLP.
void forward(const Model& m, std::span<const double> x, std::vector<double>& hidden, std::vector<double>& logits) {
  const std::size_t d = m.dims.inputs, C = m.dims.classes;
  const double* w = m.weights.data();
  logits.assign(C, 0.0);
  if (m.dims.kind == ModelKind::SoftmaxRegression) {
    const double* b = w + C * d;
    for (std::size_t c = 0; c < C; ++c) {
      double z = b[c];
      const double* wc = w + c * d;
      for (std::size_t i = 0; i < d; ++i) z += wc[i] * x[i];
      logits[c] = z;
    }
    return;
  }
  const std::size_t H = m.dims.hidden;
  const double* b1 = w + H * d;
  const double* w2 = b1 + H;
  const double* b2 = w2 + C * H;
  hidden.assign(H, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    double a = b1[h];
    const double* wh = w + h * d;
    for (std::size_t i = 0; i < d; ++i) a += wh[i] * x[i];
    hidden[h] = std::tanh(a);
  }
  for (std::size_t c = 0; c < C; ++c) {
    double z = b2[c];
    const double* wc = w2 + c * H;
    for (std::size_t h = 0; h < H; ++h) z += wc[h] * hidden[h];
    logits[c] = z;
  }
}

// Turns logits into probabilities in place; returns log-sum-exp.
double softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    s += v;
  }
  for (auto& v : z) v /= s;
  return mx + std::log(s);
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw std::invalid_argument("dataset is empty");
  if (num_features == 0) throw std::invalid_argument("dataset has no features");
  if (features.size() != labels.size() * num_features) throw std::invalid_argument("feature matrix has wrong size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) throw std::invalid_argument("label out of range");
  }
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_features = data.num_features;
  out.num_classes = data.num_classes;
  out.name = data.name;
  out.features.reserve(indices.size() * data.num_features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.size()) throw std::out_of_range("subset: index out of range");
    const auto r = data.row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

Dataset synth_classification(std::size_t n, std::size_t d, std::size_t C, double separation, RngStream& stream) {
  if (C < 2) throw std::invalid_argument("synth_classification: need at least two classes");
  if (n == 0 || d == 0) throw std::invalid_argument("synth_classification: n and d must be positive");
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    throw std::invalid_argument("synth_classification: separation must be finite and non-negative");
  }
  std::vector<std::vector<double>> centres(C, std::vector<double>(d, 0.0));
  RngStream cs = stream.child("centres");
  for (std::size_t c = 0; c < C; ++c) {
    if (d >= C) {
      centres[c][c] = separation;
      continue;
    }
    double n2 = 0.0;
    while (n2 == 0.0) {
      for (auto& v : centres[c]) v = cs.normal();
      n2 = 0.0;
      for (double v : centres[c]) n2 += v * v;
    }
    const double s = separation / std::sqrt(n2);
    for (auto& v : centres[c]) v *= s;
  }

  Dataset data;
  data.num_features = d;
  data.num_classes = C;
  data.name = "synthetic";
  data.features.resize(n * d);
  data.labels.resize(n);
  RngStream ss = stream.child("samples");
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i % C;  // balanced classes
    data.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < d; ++j) data.features[i * d + j] = centres[c][j] + ss.normal();
  }
  return data;
}

namespace {

// Slot labels for K clients with L slots each. A random label permutation is
// laid out cyclically, which gives every client min(L, C) distinct labels and
// every label an equal share of slots up to one. Random swaps that keep each
// client's labels distinct then break up the cyclic pattern.
std::vector<std::size_t> assign_slot_labels(std::size_t K, std::size_t L, std::size_t C, RngStream& stream) {
  std::vector<std::size_t> perm(C);
  for (std::size_t c = 0; c < C; ++c) perm[c] = c;
  shuffle(perm, stream);
  const std::size_t slots = K * L;
  std::vector<std::size_t> slot_label(slots);
  for (std::size_t s = 0; s < slots; ++s) slot_label[s] = perm[s % C];
  if (L >= C || K < 2) return slot_label;

  auto holds = [&](std::size_t client, std::size_t label) {
    for (std::size_t s = client * L; s < (client + 1) * L; ++s)
      if (slot_label[s] == label) return true;
    return false;
  };
  for (std::size_t i = 0; i < 8 * slots; ++i) {
    const auto p = static_cast<std::size_t>(stream.below(slots));
    const auto q = static_cast<std::size_t>(stream.below(slots));
    const std::size_t a = slot_label[p];
    const std::size_t b = slot_label[q];
    if (p / L == q / L || a == b) continue;
    if (holds(p / L, b) || holds(q / L, a)) continue;
    std::swap(slot_label[p], slot_label[q]);
  }
  return slot_label;
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_noniid_indices(const Dataset& data, std::size_t K,
                                                               std::size_t labels_per_client, RngStream& stream) {
  data.validate();
  if (K == 0) throw std::invalid_argument("partition_noniid: K must be >= 1");
  if (labels_per_client == 0) throw std::invalid_argument("partition_noniid: labels_per_client must be >= 1");
  const std::size_t C = data.num_classes;
  const std::size_t slots = K * labels_per_client;
  if (slots < C) {
    throw std::invalid_argument("partition_noniid: K * labels_per_client is smaller than the number of classes");
  }

  std::vector<std::vector<std::size_t>> pool(C);
  for (std::size_t i = 0; i < data.size(); ++i) pool[static_cast<std::size_t>(data.labels[i])].push_back(i);

  RngStream ls = stream.child("slots");
  const auto slot_label = assign_slot_labels(K, labels_per_client, C, ls);

  std::vector<std::size_t> slots_per_label(C, 0);
  for (std::size_t l : slot_label) ++slots_per_label[l];
  for (std::size_t c = 0; c < C; ++c) {
    if (pool[c].size() < slots_per_label[c]) {
      throw std::invalid_argument("partition_noniid: not enough samples of label " + std::to_string(c));
    }
    RngStream ps = stream.child("pool", c);
    shuffle(pool[c], ps);
  }

  std::vector<std::vector<std::size_t>> shards(K);
  std::vector<std::size_t> used(C, 0);
  for (std::size_t s = 0; s < slots; ++s) {
    const std::size_t c = slot_label[s];
    const std::size_t take = pool[c].size() / slots_per_label[c];
    auto& shard = shards[s / labels_per_client];
    shard.insert(shard.end(), pool[c].begin() + static_cast<long>(used[c]),
                 pool[c].begin() + static_cast<long>(used[c] + take));
    used[c] += take;
  }
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& s : shards) smallest = std::min(smallest, s.size());
  if (smallest == 0) throw std::invalid_argument("partition_noniid: a shard would be empty");
  for (std::size_t k = 0; k < K; ++k) {
    RngStream ts = stream.child("trim", k);
    shuffle(shards[k], ts);
    shards[k].resize(smallest);
    std::sort(shards[k].begin(), shards[k].end());
  }
  return shards;
}

std::vector<Dataset> partition_noniid(const Dataset& data, std::size_t K, std::size_t labels_per_client,
                                      RngStream& stream) {
  std::vector<Dataset> out;
  for (const auto& idx : partition_noniid_indices(data, K, labels_per_client, stream)) {
    out.push_back(subset(data, idx));
  }
  return out;
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::SoftmaxRegression ? "softmax_regression" : "mlp_one_hidden";
}

std::optional<ModelKind> model_kind_from_string(std::string_view name) {
  if (name == "softmax_regression") return ModelKind::SoftmaxRegression;
  if (name == "mlp_one_hidden") return ModelKind::MlpOneHidden;
  return std::nullopt;
}

std::size_t ModelDims::parameter_count() const {
  if (kind == ModelKind::SoftmaxRegression) return classes * (inputs + 1);
  return hidden * (inputs + 1) + classes * (hidden + 1);
}

Model init_model(const ModelDims& dims, RngStream& stream) {
  if (dims.inputs == 0 || dims.classes < 2) throw std::invalid_argument("init_model: degenerate dimensions");
  if (dims.kind == ModelKind::MlpOneHidden && dims.hidden == 0) {
    throw std::invalid_argument("init_model: MLP needs a hidden width");
  }
  Model m{dims, Vector(dims.parameter_count(), 0.0)};
  if (dims.kind == ModelKind::MlpOneHidden) {
    const std::size_t H = dims.hidden, d = dims.inputs, C = dims.classes;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(H));
    for (std::size_t i = 0; i < H * d; ++i) m.weights[i] = s1 * stream.normal();
    double* w2 = m.weights.data() + H * (d + 1);
    for (std::size_t i = 0; i < C * H; ++i) w2[i] = s2 * stream.normal();
  }
  return m;
}

double loss(const Model& model, const Dataset& data) {
  check_compatible(model, data);
  std::vector<double> hidden, logits;
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(model, data.row(i), hidden, logits);
    const double z_y = logits[static_cast<std::size_t>(data.labels[i])];
    total += softmax_inplace(logits) - z_y;
  }
  return total / static_cast<double>(data.size());
}

double accuracy(const Model& model, const Dataset& data) {
  check_compatible(model, data);
  std::vector<double> hidden, logits;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    forward(model, data.row(i), hidden, logits);
    const auto best = static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (best == static_cast<std::size_t>(data.labels[i])) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Vector batch_gradient(const Model& model, const Dataset& data, std::span<const std::size_t> rows) {
  check_compatible(model, data);
  if (rows.empty()) throw std::invalid_argument("batch_gradient: empty batch");
  const std::size_t d = model.dims.inputs, C = model.dims.classes, H = model.dims.hidden;
  Vector g(model.weights.size(), 0.0);
  std::vector<double> hidden, p, dh;
  for (std::size_t r : rows) {
    const auto x = data.row(r);
    forward(model, x, hidden, p);
    softmax_inplace(p);
    p[static_cast<std::size_t>(data.labels[r])] -= 1.0;  // dL/dz
    if (model.dims.kind == ModelKind::SoftmaxRegression) {
      double* gb = g.data() + C * d;
      for (std::size_t c = 0; c < C; ++c) {
        double* gw = g.data() + c * d;
        for (std::size_t i = 0; i < d; ++i) gw[i] += p[c] * x[i];
        gb[c] += p[c];
      }
      continue;
    }
    const double* w2 = model.weights.data() + H * (d + 1);
    double* gb1 = g.data() + H * d;
    double* gw2 = gb1 + H;
    double* gb2 = gw2 + C * H;
    dh.assign(H, 0.0);
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t h = 0; h < H; ++h) {
        gw2[c * H + h] += p[c] * hidden[h];
        dh[h] += w2[c * H + h] * p[c];
      }
      gb2[c] += p[c];
    }
    for (std::size_t h = 0; h < H; ++h) {
      const double da = dh[h] * (1.0 - hidden[h] * hidden[h]);
      double* gw1 = g.data() + h * d;
      for (std::size_t i = 0; i < d; ++i) gw1[i] += da * x[i];
      gb1[h] += da;
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto& v : g) v *= inv;
  return g;
}

Vector full_gradient(const Model& model, const Dataset& data) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), 0);
  return batch_gradient(model, data, rows);
}

Vector local_gradient(const Model& model, const Dataset& shard, std::size_t batch_size, RngStream& stream) {
  if (shard.size() == 0) throw std::invalid_argument("local_gradient: empty shard");
  if (batch_size == 0 || batch_size > shard.size()) {
    throw std::invalid_argument("local_gradient: batch size must be in [1, shard size]");
  }
  std::vector<std::size_t> idx(shard.size());
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first batch_size entries are a uniform sample.
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }
  return batch_gradient(model, shard, std::span<const std::size_t>(idx.data(), batch_size));
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vector clip_gradient(std::span<const double> g, double bound) {
  if (!(bound > 0.0)) throw std::invalid_argument("clip_gradient: bound must be positive");
  Vector out(g.begin(), g.end());
  const double n = norm(g);
  if (n > bound) {
    const double s = bound / n;
    for (auto& x : out) x *= s;
  }
  return out;
}

Model sgd_step(const Model& model, std::span<const double> g_hat, double eta) {
  if (!(eta >= 0.0)) throw std::invalid_argument("sgd_step: learning rate must be non-negative");
  if (g_hat.size() != model.weights.size()) throw std::invalid_argument("sgd_step: dimension mismatch");
  Model next = model;
  for (std::size_t i = 0; i < g_hat.size(); ++i) next.weights[i] -= eta * g_hat[i];
  return next;
}

std::string AggregatorConfig::name() const { return strategy ? std::string(to_string(*strategy)) : "ideal"; }

RunTrace train(const RunConfig& config, const Task& task, std::span<const double> beta, std::uint64_t seed) {
  const SystemConfig& sys = config.system;
  const std::size_t K = sys.num_targets;
  if (task.shards.size() != K) throw std::invalid_argument("train: need one shard per target device");
  if (config.aggregator.strategy && beta.size() != sys.num_devices()) {
    throw std::invalid_argument("train: geometry does not match the device count");
  }
  if (config.rounds == 0) throw std::invalid_argument("train: rounds must be >= 1");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");

  RunTrace trace;
  trace.label = config.label;
  trace.scheme = config.aggregator.name();
  trace.ris_elements = sys.ris_elements;
  trace.seed = seed;
  trace.records.reserve(config.rounds);

  const double G = sys.gradient_bound;
  Model model = task.initial;
  std::optional<Vector> previous_mean;
  for (std::size_t t = 0; t < config.rounds; ++t) {
    GradientSet grads;
    grads.targets.reserve(K);
    for (std::size_t k = 0; k < K; ++k) {
      RngStream bs = derive_stream(seed, {{"batch", t}, {"client", k}});
      grads.targets.push_back(clip_gradient(local_gradient(model, task.shards[k], config.batch_size, bs), G));
    }
    const Vector mean = ideal_round(grads);

    Vector estimate;
    double error_sq = 0.0;
    if (!config.aggregator.strategy) {
      estimate = mean;
    } else {
      RngStream cs = derive_stream(seed, {{"channel", t}});
      const auto realization = draw_realization(sys, beta, cs);
      RngStream is = derive_stream(seed, {{"interference", t}});
      std::optional<std::span<const double>> context;
      if (previous_mean) context = std::span<const double>(*previous_mean);
      grads.interferers = make_interference(config.aggregator.interference, sys.num_interferers,
                                            mean.size(), context, is)
                              .signals;
      RngStream ps = derive_stream(seed, {{"plan", t}});
      const auto plan = plan_round(*config.aggregator.strategy, sys, realization, config.aggregator.impairment, t,
                                   G * G, mean.size(), ps);
      RngStream ns = derive_stream(seed, {{"noise", t}});
      auto result = ota_round(grads, realization, plan.phases, plan.params, sys.noise_variance(), ns);
      estimate = std::move(result.estimate);
      error_sq = result.error.sq_norm;
    }

    model = sgd_step(model, estimate, config.learning_rate);
    RoundRecord rec;
    rec.round = t + 1;
    rec.train_loss = loss(model, task.train);
    rec.test_accuracy = accuracy(model, task.test);
    rec.grad_norm = norm(mean);
    rec.error_sq = error_sq;
    trace.records.push_back(rec);
    previous_mean = mean;
  }
  return trace;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("percentile: q must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PilotStats run_pilot(const Task& task, std::size_t rounds, double learning_rate, std::size_t batch_size,
                     std::uint64_t seed) {
  if (rounds == 0) throw std::invalid_argument("run_pilot: rounds must be >= 1");
  const std::size_t K = task.shards.size();
  PilotStats s;
  Model model = task.initial;
  const double f0 = loss(model, task.train);
  double f_min = f0;
  Vector prev_full;
  Vector prev_weights;
  double var_sum = 0.0;
  std::size_t var_count = 0;
  for (std::size_t t = 0; t < rounds; ++t) {
    std::vector<Vector> full(K);
    Vector global(model.weights.size(), 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      full[k] = full_gradient(model, task.shards[k]);
      for (std::size_t i = 0; i < global.size(); ++i) global[i] += full[k][i] / static_cast<double>(K);
    }
    const double gnorm = norm(global);
    GradientSet grads;
    for (std::size_t k = 0; k < K; ++k) {
      RngStream bs = derive_stream(seed, {{"batch", t}, {"client", k}});
      Vector g = local_gradient(model, task.shards[k], batch_size, bs);
      s.local_norms.push_back(norm(g));
      double dev = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) dev += (g[i] - full[k][i]) * (g[i] - full[k][i]);
      var_sum += dev;
      ++var_count;
      if (gnorm > 0.0) s.dissimilarity = std::max(s.dissimilarity, norm(full[k]) / gnorm);
      grads.targets.push_back(std::move(g));
    }
    if (!prev_full.empty()) {
      double dg = 0.0, dw = 0.0;
      for (std::size_t i = 0; i < global.size(); ++i) {
        dg += (global[i] - prev_full[i]) * (global[i] - prev_full[i]);
        dw += (model.weights[i] - prev_weights[i]) * (model.weights[i] - prev_weights[i]);
      }
      if (dw > 0.0) s.smoothness = std::max(s.smoothness, std::sqrt(dg / dw));
    }
    prev_full = global;
    prev_weights = model.weights;
    model = sgd_step(model, ideal_round(grads), learning_rate);
    f_min = std::min(f_min, loss(model, task.train));
  }
  s.gradient_bound = percentile(s.local_norms, 0.99);
  s.sgd_variance = var_sum / static_cast<double>(var_count);
  s.loss_gap = f0 - f_min;
  return s;
}

}  // namespace airfl::fl
