#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "airfl/aggregator.hpp"
#include "airfl/aircomp.hpp"

using namespace airfl;

namespace {

double norm2(const Vector& v) { return std::inner_product(v.begin(), v.end(), v.begin(), 0.0); }

Vector random_vector(std::size_t D, double scale, RngStream& s) {
  Vector v(D);
  for (auto& x : v) x = scale * s.normal();
  return v;
}

}  // namespace

TEST(Interference, AllModesUnitNorm) {
  auto s = derive_stream(1, {});
  const Vector ctx{3, -4, 0};
  for (auto mode : {InterferenceMode::RandomUnit, InterferenceMode::ZeroGradientAttack, InterferenceMode::ConstantUnit}) {
    const auto d = make_interference(mode, 5, 3, std::span<const double>(ctx), s);
    ASSERT_EQ(d.signals.size(), 5u);
    for (const auto& g : d.signals) EXPECT_NEAR(norm2(g), 1.0, 1e-12);
  }
  const auto c = make_interference(InterferenceMode::ConstantUnit, 1, 3, std::nullopt, s);
  EXPECT_EQ(c.signals[0], (Vector{1, 0, 0}));
  EXPECT_THROW(make_interference(InterferenceMode::RandomUnit, 1, 0, std::nullopt, s), std::invalid_argument);
}

TEST(Interference, ZeroGradientAttackAndFallback) {
  auto s = derive_stream(2, {});
  const Vector ctx{3, -4};
  const auto d = make_interference(InterferenceMode::ZeroGradientAttack, 2, 2, std::span<const double>(ctx), s);
  EXPECT_FALSE(d.fell_back);
  for (const auto& g : d.signals) {
    EXPECT_NEAR(g[0], -0.6, 1e-15);
    EXPECT_NEAR(g[1], 0.8, 1e-15);
  }
  const Vector zero{0, 0};
  EXPECT_TRUE(make_interference(InterferenceMode::ZeroGradientAttack, 1, 2, std::span<const double>(zero), s).fell_back);
  EXPECT_TRUE(make_interference(InterferenceMode::ZeroGradientAttack, 1, 2, std::nullopt, s).fell_back);
}

TEST(Interference, RandomUnitIsIsotropic) {
  auto s = derive_stream(3, {});
  const std::size_t D = 10000;
  double sum = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += make_interference(InterferenceMode::RandomUnit, 1, D, std::nullopt, s).signals[0][0];
  EXPECT_NEAR(sum / n, 0.0, 0.02);
}

TEST(Interference, NamesRoundTrip) {
  for (auto m : {InterferenceMode::RandomUnit, InterferenceMode::ZeroGradientAttack, InterferenceMode::ConstantUnit}) {
    EXPECT_EQ(interference_mode_from_string(to_string(m)), m);
  }
  EXPECT_FALSE(interference_mode_from_string("jamming"));
}

TEST(IdealRound, Examples) {
  GradientSet g;
  g.targets = {{1, 2}, {1, 2}, {1, 2}};
  EXPECT_EQ(ideal_round(g), (Vector{1, 2}));
  g.targets = {{1, -3}, {-1, 3}};
  EXPECT_EQ(ideal_round(g), (Vector{0, 0}));
  auto s = derive_stream(4, {});
  g.targets.clear();
  for (int k = 0; k < 5; ++k) g.targets.push_back(random_vector(7, 1, s));
  const auto m = ideal_round(g);
  for (int d = 0; d < 7; ++d) {
    double b = 0;
    for (const auto& t : g.targets) b += t[d];
    EXPECT_NEAR(m[d], b / 5, 1e-15);
  }
}

namespace {

struct Setup {
  SystemConfig c;
  std::vector<double> beta;
};

Setup small(std::size_t K, std::size_t M, std::size_t N, double psd) {
  Setup s;
  s.c.num_targets = K;
  s.c.num_interferers = M;
  s.c.ris_elements = N;
  s.c.noise_psd_w_per_hz = psd;
  auto g = derive_stream(9, {{"geometry", 0}});
  s.beta = draw_geometry(s.c, g);
  return s;
}

}  // namespace

TEST(OtaRound, ZeroInputGivesZero) {
  auto st = small(3, 0, 8, 0);
  auto s = derive_stream(5, {});
  const auto r = draw_realization(st.c, st.beta, s);
  const auto plan = plan_round(Strategy::SchemeI, st.c, r, {}, 0, 1, 4, s);
  GradientSet g;
  g.targets.assign(3, Vector(4, 0.0));
  const auto out = ota_round(g, r, plan.phases, plan.params, 0.0, s);
  for (double x : out.estimate) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(out.error.sq_norm, 0.0);
}

TEST(OtaRound, GenieDenoiserInvertsSingleDevice) {
  auto st = small(1, 0, 16, 0);
  auto s = derive_stream(6, {});
  const auto r = draw_realization(st.c, st.beta, s);
  auto params = scheme1_params(st.c, st.beta);
  const auto ph = aligned_phases(r.h_p, std::span(r.h_r.data(), 1), params.w);
  params.lambda = r.beta[0] * params.sqrt_p[0] * effective_coefficient(r.h_p, ph, r.h_r[0]);
  GradientSet g;
  g.targets = {{0.3, -0.2, 0.1}};
  const auto out = ota_round(g, r, ph, params, 0.0, s);
  for (int d = 0; d < 3; ++d) EXPECT_NEAR(out.estimate[d], g.targets[0][d], 1e-12);
}

TEST(OtaRound, RejectsBadInput) {
  auto st = small(2, 1, 4, 0);
  auto s = derive_stream(7, {});
  const auto r = draw_realization(st.c, st.beta, s);
  auto plan = plan_round(Strategy::SchemeI, st.c, r, {}, 0, 1, 2, s);
  GradientSet g;
  g.targets = {{1, 0}, {0, 1}};
  g.interferers = {{1, 0, 0}};
  EXPECT_THROW(ota_round(g, r, plan.phases, plan.params, 0.0, s), std::invalid_argument);
  g.interferers = {{1, 0}};
  plan.params.lambda = 0;
  EXPECT_THROW(ota_round(g, r, plan.phases, plan.params, 0.0, s), std::invalid_argument);
}

TEST(OtaRound, LinearInGradients) {
  auto st = small(4, 0, 32, 0);
  auto s = derive_stream(8, {});
  const auto r = draw_realization(st.c, st.beta, s);
  const auto plan = plan_round(Strategy::SchemeII, st.c, r, {}, 0, 1, 5, s);
  GradientSet g;
  for (int k = 0; k < 4; ++k) g.targets.push_back(random_vector(5, 0.2, s));
  auto g2 = g;
  for (auto& t : g2.targets) for (auto& x : t) x *= 2.5;
  auto s1 = derive_stream(1, {}), s2 = derive_stream(1, {});
  const auto a = ota_round(g, r, plan.phases, plan.params, 0.0, s1);
  const auto b = ota_round(g2, r, plan.phases, plan.params, 0.0, s2);
  for (int d = 0; d < 5; ++d) EXPECT_NEAR(b.estimate[d], 2.5 * a.estimate[d], 1e-12);
}

TEST(OtaRound, NoiseOnlyVariance) {
  auto st = small(2, 0, 8, 1e-15);
  auto s = derive_stream(10, {});
  const auto r = draw_realization(st.c, st.beta, s);
  const auto plan = plan_round(Strategy::SchemeI, st.c, r, {}, 0, 1, 50, s);
  GradientSet g;
  g.targets.assign(2, Vector(50, 0.0));
  const double sigma2 = st.c.noise_variance();
  const int n = 4000;
  double sq = 0;
  for (int i = 0; i < n; ++i) {
    const auto out = ota_round(g, r, plan.phases, plan.params, sigma2, s);
    sq += norm2(out.estimate);
    ASSERT_NEAR(out.error.noise_sq, out.error.sq_norm, 1e-12 * out.error.sq_norm + 1e-300);
  }
  const double expected = sigma2 / (2 * plan.params.lambda * plan.params.lambda);
  EXPECT_NEAR(sq / (n * 50.0), expected, 0.03 * expected);
}

TEST(OtaRound, ErrorStatsConsistent) {
  auto st = small(3, 2, 16, 1e-17);
  auto s = derive_stream(11, {});
  const auto r = draw_realization(st.c, st.beta, s);
  const auto plan = plan_round(Strategy::SchemeI, st.c, r, {}, 0, 1, 6, s);
  GradientSet g;
  for (int k = 0; k < 3; ++k) g.targets.push_back(random_vector(6, 0.3, s));
  g.interferers = make_interference(InterferenceMode::RandomUnit, 2, 6, std::nullopt, s).signals;
  const auto out = ota_round(g, r, plan.phases, plan.params, st.c.noise_variance(), s);
  const auto ideal = ideal_round(g);
  for (int d = 0; d < 6; ++d) EXPECT_NEAR(out.error.epsilon[d], out.estimate[d] - ideal[d], 1e-12);
  EXPECT_NEAR(out.error.sq_norm, norm2(out.error.epsilon), 1e-12 * out.error.sq_norm);
  const auto coeffs = device_coefficients(r, plan.phases, plan.params);
  auto s1 = derive_stream(3, {}), s2 = derive_stream(3, {});
  const auto a = ota_round(g, r, plan.phases, plan.params, 1e-11, s1);
  const auto b = ota_round_from_coefficients(g, coeffs, plan.params.lambda, 1e-11, s2);
  EXPECT_EQ(a.estimate, b.estimate);
}

TEST(OtaRound, SchemeOneUnbiasedPerCoordinate) {
  auto st = small(8, 4, 64, 1e-17);
  auto gs = derive_stream(12, {{"grads", 0}});
  GradientSet g;
  for (int k = 0; k < 8; ++k) g.targets.push_back(random_vector(5, 0.3, gs));
  const auto ideal = ideal_round(g);
  const int n = 100000;
  std::vector<double> sum(5, 0), sq(5, 0);
  for (int t = 0; t < n; ++t) {
    auto s = derive_stream(12, {{"trial", static_cast<std::uint64_t>(t)}});
    const auto r = draw_realization(st.c, st.beta, s);
    const auto plan = plan_round(Strategy::SchemeI, st.c, r, {}, t, 1, 5, s);
    g.interferers = make_interference(InterferenceMode::RandomUnit, 4, 5, std::nullopt, s).signals;
    const auto out = ota_round(g, r, plan.phases, plan.params, st.c.noise_variance(), s);
    for (int d = 0; d < 5; ++d) sum[d] += out.estimate[d], sq[d] += out.estimate[d] * out.estimate[d];
  }
  for (int d = 0; d < 5; ++d) {
    const double m = sum[d] / n, se = std::sqrt((sq[d] / n - m * m) / n);
    EXPECT_NEAR(m, ideal[d], 3 * se) << "coordinate " << d;
  }
}
