#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "airfl/fl.hpp"
#include "airfl/harness.hpp"

using namespace airfl;
using namespace airfl::fl;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

Model perturbed(const Model& m, std::span<const double> v, double eps) {
  Model out = m;
  for (std::size_t i = 0; i < v.size(); ++i) out.weights[i] += eps * v[i];
  return out;
}

Model random_model(const ModelDims& dims, RngStream& s) {
  Model m = init_model(dims, s);
  for (auto& w : m.weights) w += 0.3 * s.normal();
  return m;
}

// Trains with ideal aggregation on a single shard holding all of `train`.
Model fit(const Dataset& train, std::size_t rounds, double eta, std::uint64_t seed) {
  auto s = derive_stream(seed, {{"fit", 0}});
  Model m = init_model({ModelKind::SoftmaxRegression, train.num_features, 0, train.num_classes}, s);
  for (std::size_t t = 0; t < rounds; ++t) m = sgd_step(m, full_gradient(m, train), eta);
  return m;
}

void write_be32(std::ofstream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("airfl_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

void write_images(const std::filesystem::path& p, std::uint32_t magic, std::uint32_t n, std::size_t pixels) {
  std::ofstream f(p, std::ios::binary);
  write_be32(f, magic);
  write_be32(f, n);
  write_be32(f, 28);
  write_be32(f, 28);
  for (std::size_t i = 0; i < pixels; ++i) f.put(static_cast<char>(i % 256));
}

void write_labels(const std::filesystem::path& p, std::vector<std::uint8_t> labels) {
  std::ofstream f(p, std::ios::binary);
  write_be32(f, 0x00000801);
  write_be32(f, static_cast<std::uint32_t>(labels.size()));
  f.write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size()));
}

}  // namespace

TEST(SynthClassification, DeterministicAndBalanced) {
  auto a = derive_stream(1, {{"data", 0}});
  auto b = derive_stream(1, {{"data", 0}});
  const auto x = synth_classification(200, 5, 4, 2.0, a);
  const auto y = synth_classification(200, 5, 4, 2.0, b);
  EXPECT_EQ(x.features, y.features);
  EXPECT_EQ(x.labels, y.labels);
  EXPECT_NO_THROW(x.validate());
  for (int c = 0; c < 4; ++c) EXPECT_EQ(std::count(x.labels.begin(), x.labels.end(), c), 50);
  EXPECT_THROW(synth_classification(10, 3, 1, 1.0, a), std::invalid_argument);
  EXPECT_THROW(synth_classification(0, 3, 2, 1.0, a), std::invalid_argument);
  EXPECT_THROW(synth_classification(10, 0, 2, 1.0, a), std::invalid_argument);
}

TEST(SynthClassification, ZeroSeparationIsChance) {
  auto s = derive_stream(2, {{"data", 0}});
  const auto all = synth_classification(6000, 10, 10, 0.0, s);
  std::vector<std::size_t> tr(4000), te(2000);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(te.begin(), te.end(), 4000);
  const auto m = fit(subset(all, tr), 300, 0.5, 2);
  EXPECT_NEAR(accuracy(m, subset(all, te)), 0.1, 0.05);
}

TEST(SynthClassification, LargeSeparationIsLinearlySeparable) {
  auto s = derive_stream(3, {{"data", 0}});
  const auto all = synth_classification(3000, 10, 10, 6.0, s);
  std::vector<std::size_t> tr(2000), te(1000);
  std::iota(tr.begin(), tr.end(), 0);
  std::iota(te.begin(), te.end(), 2000);
  const auto m = fit(subset(all, tr), 200, 0.5, 3);
  EXPECT_GE(accuracy(m, subset(all, te)), 0.95);
}

TEST(Partition, DisjointEqualAndLabelLimited) {
  auto s = derive_stream(4, {});
  const auto data = synth_classification(2000, 3, 10, 1.0, s);
  for (std::size_t L : {1, 2, 3, 10}) {
    const std::size_t K = 20;
    const auto idx = partition_noniid_indices(data, K, L, s);
    ASSERT_EQ(idx.size(), K);
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& shard : idx) {
      ASSERT_EQ(shard.size(), idx[0].size());
      ASSERT_GT(shard.size(), 0u);
      std::set<int> labels;
      for (auto i : shard) labels.insert(data.labels[i]), seen.insert(i);
      total += shard.size();
      ASSERT_LE(labels.size(), L);
    }
    EXPECT_EQ(seen.size(), total) << "shards overlap";
    EXPECT_LE(data.size() - total, data.size() / 10) << "remainder too large for L=" << L;
  }
}

TEST(Partition, SingleLabelAndIidLike) {
  auto s = derive_stream(5, {});
  const auto data = synth_classification(500, 3, 5, 1.0, s);
  const auto single = partition_noniid(data, 5, 1, s);
  std::set<int> owners;
  for (const auto& shard : single) {
    std::set<int> l(shard.labels.begin(), shard.labels.end());
    ASSERT_EQ(l.size(), 1u);
    owners.insert(*l.begin());
  }
  EXPECT_EQ(owners.size(), 5u);
  const auto iid = partition_noniid_indices(data, 4, 5, s);
  for (const auto& shard : iid) {
    std::set<int> l;
    for (auto i : shard) l.insert(data.labels[i]);
    EXPECT_EQ(l.size(), 5u);
  }
  EXPECT_THROW(partition_noniid(data, 2, 2, s), std::invalid_argument);
  EXPECT_THROW(partition_noniid(data, 3, 0, s), std::invalid_argument);
}

TEST(Idx, HandBuiltFixtureRoundTrip) {
  const auto dir = temp_dir("idx_ok");
  write_images(dir / "img", 0x00000803, 2, 2 * 784);
  write_labels(dir / "lab", {3, 7});
  const auto d = load_idx(dir / "img", dir / "lab");
  EXPECT_EQ(d.size(), 2u);
  EXPECT_EQ(d.num_features, 784u);
  EXPECT_EQ(d.num_classes, 10u);
  EXPECT_EQ(d.labels, (std::vector<int>{3, 7}));
  EXPECT_DOUBLE_EQ(d.row(0)[255], 1.0);
  EXPECT_DOUBLE_EQ(d.row(1)[0], (784 % 256) / 255.0);
  for (double x : d.features) ASSERT_TRUE(x >= 0.0 && x <= 1.0);
}

TEST(Idx, Errors) {
  const auto dir = temp_dir("idx_bad");
  write_images(dir / "magic", 0x00000903, 2, 2 * 784);
  write_images(dir / "short", 0x00000803, 2, 784 + 10);
  write_images(dir / "img", 0x00000803, 2, 2 * 784);
  write_labels(dir / "lab3", {1, 2, 3});
  write_labels(dir / "lab", {1, 2});
  write_labels(dir / "lab_bad", {1, 12});
  EXPECT_THROW(load_idx(dir / "magic", dir / "lab"), std::runtime_error);
  EXPECT_THROW(load_idx(dir / "short", dir / "lab"), std::runtime_error);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab3"), std::runtime_error);
  EXPECT_THROW(load_idx(dir / "img", dir / "lab_bad"), std::runtime_error);
  EXPECT_THROW(load_idx(dir / "img", dir / "missing"), std::runtime_error);
  try {
    load_mnist(dir / "nowhere", true);
    FAIL() << "expected an error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("train-images-idx3-ubyte"), std::string::npos);
  }
}

TEST(Idx, MnistTrainFileIfPresent) {
  const char* dir = std::getenv("AIRFL_MNIST_DIR");
  if (!dir || !std::filesystem::exists(std::filesystem::path(dir) / "train-images-idx3-ubyte")) {
    GTEST_SKIP() << "set AIRFL_MNIST_DIR to run against the MNIST files";
  }
  EXPECT_EQ(load_mnist(dir, true).size(), 60000u);
}

TEST(Models, ParameterCountsAndNames) {
  EXPECT_EQ((ModelDims{ModelKind::SoftmaxRegression, 20, 0, 10}.parameter_count()), 210u);
  EXPECT_EQ((ModelDims{ModelKind::MlpOneHidden, 20, 32, 10}.parameter_count()), 20u * 32 + 32 + 32 * 10 + 10);
  for (auto k : {ModelKind::SoftmaxRegression, ModelKind::MlpOneHidden}) EXPECT_EQ(model_kind_from_string(to_string(k)), k);
  EXPECT_FALSE(model_kind_from_string("cnn"));
}

class FiniteDifference : public ::testing::TestWithParam<ModelKind> {};

TEST_P(FiniteDifference, MatchesAnalyticGradient) {
  auto s = derive_stream(6, {{"fd", 0}});
  const auto data = synth_classification(60, 6, 4, 1.5, s);
  const ModelDims dims{GetParam(), 6, 5, 4};
  const Model m = random_model(dims, s);
  const auto g = full_gradient(m, data);
  const double eps = 1e-5;
  for (int dir = 0; dir < 10; ++dir) {
    Vector v(g.size());
    for (auto& x : v) x = s.normal();
    const double fd = (loss(perturbed(m, v, eps), data) - loss(perturbed(m, v, -eps), data)) / (2 * eps);
    const double an = dot(g, v);
    EXPECT_NEAR(fd, an, 1e-5 * std::abs(an)) << "direction " << dir;
  }
}

INSTANTIATE_TEST_SUITE_P(BothModels, FiniteDifference,
                         ::testing::Values(ModelKind::SoftmaxRegression, ModelKind::MlpOneHidden));

TEST(LocalGradient, FullBatchEqualsFullGradient) {
  auto s = derive_stream(7, {});
  const auto data = synth_classification(40, 4, 4, 1.0, s);
  for (auto kind : {ModelKind::SoftmaxRegression, ModelKind::MlpOneHidden}) {
    const Model m = random_model({kind, 4, 3, 4}, s);
    const auto full = full_gradient(m, data);
    const auto batch = local_gradient(m, data, data.size(), s);
    for (std::size_t i = 0; i < full.size(); ++i) EXPECT_NEAR(batch[i], full[i], 1e-14);
  }
  const Model m = random_model({ModelKind::SoftmaxRegression, 4, 0, 4}, s);
  EXPECT_THROW(local_gradient(m, data, data.size() + 1, s), std::invalid_argument);
  Dataset empty;
  empty.num_features = 4;
  empty.num_classes = 4;
  EXPECT_THROW(local_gradient(m, empty, 1, s), std::invalid_argument);
}

TEST(LocalGradient, ZeroSoftmaxBalancedLabelsHasZeroBiasGradient) {
  auto s = derive_stream(8, {});
  const auto data = synth_classification(100, 3, 5, 2.0, s);
  auto m = init_model({ModelKind::SoftmaxRegression, 3, 0, 5}, s);
  for (double w : m.weights) ASSERT_EQ(w, 0.0);
  const auto g = full_gradient(m, data);
  for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(g[15 + c], 0.0, 1e-15);
}

TEST(LocalGradient, MiniBatchesAreUnbiased) {
  auto s = derive_stream(9, {});
  const auto data = synth_classification(80, 3, 3, 1.0, s);
  const Model m = random_model({ModelKind::SoftmaxRegression, 3, 0, 3}, s);
  const auto full = full_gradient(m, data);
  const int n = 20000;
  std::vector<double> sum(full.size(), 0), sq(full.size(), 0);
  for (int i = 0; i < n; ++i) {
    const auto g = local_gradient(m, data, 10, s);
    for (std::size_t j = 0; j < g.size(); ++j) sum[j] += g[j], sq[j] += g[j] * g[j];
  }
  for (std::size_t j = 0; j < full.size(); ++j) {
    const double mean = sum[j] / n, se = std::sqrt((sq[j] / n - mean * mean) / n);
    EXPECT_NEAR(mean, full[j], 3 * se) << "coordinate " << j;
  }
}

TEST(Clip, Behaviour) {
  const Vector small{0.3, 0.4};  // norm 0.5
  EXPECT_EQ(clip_gradient(small, 1.0), small);
  const Vector big{1.2, 1.6};  // norm 2
  const auto c = clip_gradient(big, 1.0);
  EXPECT_NEAR(norm(c), 1.0, 1e-15);
  EXPECT_NEAR(c[0] / c[1], 0.75, 1e-15);
  EXPECT_EQ(clip_gradient(c, 1.0), c);
  EXPECT_THROW(clip_gradient(big, 0.0), std::invalid_argument);
}

TEST(SgdStep, Behaviour) {
  Model m{{ModelKind::SoftmaxRegression, 1, 0, 2}, {1, 2, 3, 4}};
  const Vector zero(4, 0.0), g{1, -1, 0.5, 2};
  EXPECT_EQ(sgd_step(m, zero, 0.1).weights, m.weights);
  const auto two = sgd_step(sgd_step(m, g, 0.25), g, 0.25);
  const auto one = sgd_step(m, g, 0.5);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(two.weights[i], one.weights[i], 1e-15);
  EXPECT_THROW(sgd_step(m, Vector(3, 0.0), 0.1), std::invalid_argument);
  RunConfig defaults;
  EXPECT_EQ(defaults.learning_rate, 0.005);
  EXPECT_EQ(defaults.batch_size, 50u);
}

TEST(Train, IdealSeparableReachesNinetyPercent) {
  harness::TaskSpec spec;
  spec.separation = 6.0;
  const auto task = harness::build_task(spec, 20, 1);
  RunConfig rc;
  rc.label = "ideal";
  rc.rounds = 200;
  rc.system.gradient_bound = 10.0;
  const auto trace = train(rc, task, {}, 1);
  ASSERT_EQ(trace.records.size(), 200u);
  EXPECT_GE(trace.records.back().test_accuracy, 0.9);
  for (const auto& r : trace.records) ASSERT_EQ(r.error_sq, 0.0);
}

TEST(Train, LargeSurfaceWithoutImpairmentsTracksIdeal) {
  harness::TaskSpec spec;
  const auto task = harness::build_task(spec, 20, 2);
  SystemConfig sys;
  sys.ris_elements = 1024;
  sys.num_interferers = 0;
  sys.noise_psd_w_per_hz = 1e-30;
  auto g = derive_stream(2, {{"geometry", 0}});
  const auto beta = draw_geometry(sys, g);
  const double G = run_pilot(task, 50, 0.005, 50, 2).gradient_bound;
  sys.gradient_bound = G;
  RunConfig ideal;
  ideal.system = sys;
  RunConfig ota = ideal;
  ota.aggregator.strategy = Strategy::SchemeI;
  const auto a = train(ideal, task, beta, 2);
  const auto b = train(ota, task, beta, 2);
  EXPECT_NEAR(a.records.back().test_accuracy, b.records.back().test_accuracy, 0.02);
  EXPECT_EQ(b.ris_elements, 1024u);
  EXPECT_EQ(b.scheme, "scheme1");
}

TEST(Train, IidIdealLossDecreasesOverWindows) {
  int passing = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    harness::TaskSpec spec;
    spec.labels_per_client = spec.classes;
    const auto task = harness::build_task(spec, 20, seed);
    RunConfig rc;
    rc.system.gradient_bound = 1e6;
    const auto trace = train(rc, task, {}, seed);
    bool ok = true;
    for (std::size_t t = 0; t + 20 < trace.records.size(); ++t) {
      ok = ok && trace.records[t + 20].train_loss <= trace.records[t].train_loss;
    }
    passing += ok;
  }
  EXPECT_GE(passing, 2);
}

TEST(Pilot, PercentileAndMeasuredConstants) {
  EXPECT_DOUBLE_EQ(percentile({1, 2, 3, 4, 5}, 0.5), 3);
  EXPECT_DOUBLE_EQ(percentile({1, 2}, 0.99), 1.99);
  harness::TaskSpec spec;
  const auto task = harness::build_task(spec, 10, 3);
  const auto p = run_pilot(task, 20, 0.005, 50, 3);
  EXPECT_EQ(p.local_norms.size(), 200u);
  EXPECT_GT(p.gradient_bound, 0);
  EXPECT_LE(p.gradient_bound, *std::max_element(p.local_norms.begin(), p.local_norms.end()));
  EXPECT_GT(p.smoothness, 0);
  EXPECT_GE(p.dissimilarity, 1.0);
  EXPECT_GT(p.sgd_variance, 0);
  EXPECT_GT(p.loss_gap, 0);
}
