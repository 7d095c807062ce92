#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "allact/critic.hpp"
#include "allact/errors.hpp"
#include "allact/estimators.hpp"
#include "allact/stats.hpp"

namespace allact {
namespace {

class FnAdvantage : public AdvantageFunction {
 public:
  explicit FnAdvantage(std::function<double(std::span<const double>)> f) : f_(std::move(f)) {}
  double Advantage(std::span<const double>, std::span<const double> a) const override { return f_(a); }

 private:
  std::function<double(std::span<const double>)> f_;
};

GaussianPolicy BanditMlpPolicy(std::uint64_t seed) {
  const EnvSpec spec = DefaultBanditSpec();
  const Architecture arch = Architecture::Mlp(1, std::vector<std::size_t>{4}, 1);
  Rng rng(seed);
  ParamVector p = InitParams(arch, rng);
  // The bandit state is 0, so only biases move the mean; give them some.
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.3 * rng.Normal();
  return GaussianPolicy(Network(arch, p), {0.5}, spec.box);
}

double Norm(const GradVector& g) { return std::sqrt(SquaredNorm(g)); }

TEST(EstimatorKind, RoundTripsNames) {
  for (EstimatorKind k : {EstimatorKind::kReinforce, EstimatorKind::kQuadrature, EstimatorKind::kMc}) {
    EXPECT_EQ(EstimatorKindFromString(ToString(k)), k);
  }
  EXPECT_THROW(EstimatorKindFromString("ppo"), ArgumentError);
}

TEST(Reinforce, PerfectBaselineGivesZero) {
  const EnvSpec spec = DefaultLqrSpec();
  const Architecture arch = Architecture::Mlp(2, std::vector<std::size_t>{}, 1);
  const GaussianPolicy pi(Network(arch, ParamVector(std::vector<double>{-0.5, -0.2, 0.0})), {0.3}, spec.box);
  Rng rng(1);
  Trajectory t = Rollout(spec, pi, rng);
  const Baseline exact = [&](std::span<const double> s) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (std::equal(s.begin(), s.end(), t.states[i].begin())) return t.returns[i];
    }
    return 0.0;
  };
  const GradientEstimate g = ReinforceEstimate(t, pi, exact);
  for (double v : g.grad) EXPECT_EQ(v, 0.0);
}

TEST(Reinforce, BanditIsSingleTerm) {
  const EnvSpec spec = DefaultBanditSpec();
  const GaussianPolicy pi = BanditMlpPolicy(2);
  const Architecture va = Architecture::Mlp(1, std::vector<std::size_t>{}, 1);
  const Network v(va, ParamVector(std::vector<double>{0.0, -1.25}));
  Rng rng(3);
  const Trajectory t = Rollout(spec, pi, rng);
  const GradientEstimate g = ReinforceEstimate(t, pi, v);
  const GradVector score = pi.Score(t.states[0], t.raw_actions[0]);
  for (std::size_t i = 0; i < g.grad.size(); ++i) {
    EXPECT_DOUBLE_EQ(g.grad[i], score[i] * (t.rewards[0] + 1.25));
  }
  EXPECT_EQ(g.kind, EstimatorKind::kReinforce);
}

TEST(Reinforce, BanditMeanMatchesOracleGradient) {
  const EnvSpec spec = DefaultBanditSpec();
  const GaussianPolicy pi = BanditMlpPolicy(4);
  const BanditAdvantageOracle oracle(spec, pi);
  const Architecture va = Architecture::Mlp(1, std::vector<std::size_t>{}, 1);
  const Network v(va, ParamVector(std::vector<double>{0.0, oracle.value()}));
  const GradVector exact = BanditOracleGradient(spec, pi);
  Rng rng(5);
  const std::size_t n = 100000;
  std::vector<Vec> comps(exact.size(), Vec(n));
  for (std::size_t i = 0; i < n; ++i) {
    const GradientEstimate g = ReinforceEstimate(Rollout(spec, pi, rng), pi, v);
    for (std::size_t k = 0; k < g.grad.size(); ++k) comps[k][i] = g.grad[k];
  }
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const MeanSe ms = MeanWithSe(comps[k]);
    EXPECT_LT(std::abs(ms.mean - exact[k]), 3.0 * ms.se + 1e-12) << "component " << k;
  }
}

TEST(QuadratureSpec, TrapezoidIsExactOnLinearFunctions) {
  auto integrate = [](std::size_t n) {
    const QuadratureSpec q(n, -2.0, 5.0);
    CompensatedSum sum;
    for (std::size_t i = 0; i < q.n; ++i) sum.Add(q.weights[i] * (0.3 - 1.7 * q.grid[i]));
    return sum.value();
  };
  const double exact = 0.3 * 7.0 - 1.7 * (25.0 - 4.0) / 2.0;
  EXPECT_NEAR(integrate(33), exact, 1e-12);
  EXPECT_LT(std::abs(integrate(65) - integrate(33)), 1e-12);
}

TEST(QuadratureSpec, RejectsDegenerateGrids) {
  EXPECT_THROW(QuadratureSpec(1, 0.0, 1.0), ArgumentError);
  EXPECT_THROW(QuadratureSpec(8, 1.0, 1.0), ArgumentError);
  EXPECT_THROW(QuadratureSpec::ForBox(8, ActionBox({-1.0, -1.0}, {1.0, 1.0})), UnsupportedError);
}

TEST(Quadrature, ConstantAdvantageIsAnnihilated) {
  const GaussianPolicy pi = BanditMlpPolicy(6);
  const double c = 3.0;
  const FnAdvantage constant([&](std::span<const double>) { return c; });
  const Vec s{0.0};
  const double mu = pi.Mean(s)[0];
  ASSERT_GT(mu - 8 * 0.5, pi.box().low[0]);
  ASSERT_LT(mu + 8 * 0.5, pi.box().high[0]);
  const GradientEstimate g = QuadratureEstimate(pi, constant, s, QuadratureSpec::ForBox(4097, pi.box()));
  const std::vector<Vec> states{s};
  const double m = ScoreNormBound(pi, states).m;
  EXPECT_LT(Norm(g.grad), 1e-6 * c * std::sqrt(m));
}

TEST(Quadrature, BanditOracleAdvantageMatchesOracleGradient) {
  const EnvSpec spec = DefaultBanditSpec();
  const GaussianPolicy pi = BanditMlpPolicy(7);
  const BanditAdvantageOracle oracle(spec, pi);
  const GradientEstimate g = QuadratureEstimate(pi, oracle, Vec{0.0}, QuadratureSpec::ForBox(1 << 14, spec.box));
  const GradVector exact = BanditOracleGradient(spec, pi);
  for (std::size_t k = 0; k < exact.size(); ++k) EXPECT_NEAR(g.grad[k], exact[k], 1e-8);
}

TEST(Mc, SingleSampleIsOneTerm) {
  const GaussianPolicy pi = BanditMlpPolicy(8);
  const FnAdvantage adv([](std::span<const double> a) { return std::sin(a[0]); });
  const Vec s{0.0};
  Rng rng(9);
  Rng replay = rng;
  const GradientEstimate g = McEstimate(pi, adv, s, McSpec(1), rng);
  const Vec a = pi.SampleRaw(s, replay);
  const GradVector score = pi.Score(s, a);
  for (std::size_t k = 0; k < score.size(); ++k) EXPECT_NEAR(g.grad[k], score[k] * std::sin(a[0]), 1e-12);
}

TEST(Mc, ZeroAdvantageGivesZero) {
  const GaussianPolicy pi = BanditMlpPolicy(10);
  const FnAdvantage zero([](std::span<const double>) { return 0.0; });
  Rng rng(11);
  for (std::size_t n : {1u, 7u, 64u}) {
    for (double v : McEstimate(pi, zero, Vec{0.0}, McSpec(n), rng).grad) EXPECT_EQ(v, 0.0);
  }
  EXPECT_THROW(McEstimate(pi, zero, Vec{0.0}, McSpec(0), rng), ArgumentError);
}

TEST(Mc, SingleSampleMeanMatchesQuadrature) {
  const EnvSpec spec = DefaultBanditSpec();
  const GaussianPolicy pi = BanditMlpPolicy(12);
  const BanditAdvantageOracle oracle(spec, pi);
  const Vec s{0.0};
  const GradVector quad = QuadratureEstimate(pi, oracle, s, QuadratureSpec::ForBox(1 << 14, spec.box)).grad;
  Rng rng(13);
  const std::size_t n = 1000000;
  std::vector<Vec> comps(quad.size(), Vec(n));
  for (std::size_t i = 0; i < n; ++i) {
    const GradientEstimate g = McEstimate(pi, oracle, s, McSpec(1), rng);
    for (std::size_t k = 0; k < quad.size(); ++k) comps[k][i] = g.grad[k];
  }
  for (std::size_t k = 0; k < quad.size(); ++k) {
    const MeanSe ms = MeanWithSe(comps[k]);
    EXPECT_LT(std::abs(ms.mean - quad[k]), 3.0 * ms.se + 1e-12) << "component " << k;
  }
}

TEST(Mc, SameSeedSameBits) {
  const GaussianPolicy pi = BanditMlpPolicy(14);
  const FnAdvantage adv([](std::span<const double> a) { return a[0] * a[0]; });
  Rng a(15), b(15);
  EXPECT_EQ(McEstimate(pi, adv, Vec{0.0}, McSpec(64), a).grad, McEstimate(pi, adv, Vec{0.0}, McSpec(64), b).grad);
}

TEST(TrajectoryEstimate, AveragesPerStateEstimates) {
  const EnvSpec spec = DefaultLqrSpec();
  const Architecture arch = Architecture::Mlp(2, std::vector<std::size_t>{}, 1);
  const GaussianPolicy pi(Network(arch, ParamVector(std::vector<double>{-0.5, -0.2, 0.0})), {0.3}, spec.box);
  const FnAdvantage adv([](std::span<const double> a) { return -a[0] * a[0]; });
  Rng rng(16);
  Trajectory t = Rollout(spec, pi, rng);
  const AllActionConfig cfg{EstimatorKind::kQuadrature, 257};
  Rng unused(0);
  const GradientEstimate all = TrajectoryEstimate(pi, adv, t, cfg, unused);
  GradVector manual(pi.param_dim());
  for (const Vec& s : t.states) {
    Axpy(1.0 / static_cast<double>(t.size()), StateEstimate(pi, adv, s, cfg, unused).grad, manual);
  }
  for (std::size_t k = 0; k < manual.size(); ++k) EXPECT_NEAR(all.grad[k], manual[k], 1e-12 * (1 + std::abs(manual[k])));
  EXPECT_EQ(all.n_states, t.size());
}

TEST(VarianceDecomposition, DeterministicDrawHasNoConditionalVariance) {
  const StateDraw draw = [](std::span<const double> s, Rng&) {
    return GradVector(std::vector<double>{s[0], 2.0 * s[0] * s[0]});
  };
  const std::vector<Vec> states{{0.1}, {-0.4}, {1.3}, {0.7}};
  const VarianceReport r = VarianceDecomposition(draw, states, 50, Rng(17));
  EXPECT_NEAR(r.expected_cond_var, 0.0, 1e-15);
  EXPECT_NEAR(r.total_var, r.var_state, 1e-12);
  EXPECT_GT(r.var_state, 0.0);
}

TEST(VarianceDecomposition, SingleStateIsAllConditional) {
  const EnvSpec spec = DefaultBanditSpec();
  const GaussianPolicy pi = BanditMlpPolicy(18);
  const BanditAdvantageOracle oracle(spec, pi);
  const std::vector<Vec> states{{0.0}};
  const VarianceReport r = VarianceDecomposition(pi, oracle, states, McSpec(4), 10000, Rng(19));
  EXPECT_NEAR(r.var_state, 0.0, 1e-15);
  EXPECT_NEAR(r.total_var, r.expected_cond_var, 0.05 * r.total_var);
}

TEST(VarianceDecomposition, IdentityHoldsOnTheBandit) {
  const EnvSpec spec = DefaultBanditSpec();
  const GaussianPolicy pi = BanditMlpPolicy(20);
  const BanditAdvantageOracle oracle(spec, pi);
  const std::vector<Vec> states(16, Vec{0.0});
  const VarianceReport r = VarianceDecomposition(pi, oracle, states, McSpec(8), 1000, Rng(21));
  EXPECT_NEAR(r.total_var, r.var_state + r.expected_cond_var, 0.05 * r.total_var);
  EXPECT_EQ(r.n_states, 16u);
  EXPECT_EQ(r.reps, 1000u);
}

TEST(VarianceDecomposition, StatesWithDifferentMeansSplitTheVariance) {
  // draw = s + N(0, 1): var_state is the spread of s, cond var is 1.
  const StateDraw draw = [](std::span<const double> s, Rng& rng) {
    return GradVector(std::vector<double>{s[0] + rng.Normal()});
  };
  std::vector<Vec> states;
  for (int i = 0; i < 20; ++i) states.push_back({static_cast<double>(i % 5)});
  const VarianceReport r = VarianceDecomposition(draw, states, 2000, Rng(22));
  EXPECT_NEAR(r.expected_cond_var, 1.0, 0.05);
  EXPECT_NEAR(r.var_state, 2.0, 0.05);
  EXPECT_NEAR(r.total_var, r.var_state + r.expected_cond_var, 1e-9 * r.total_var);
  EXPECT_GT(r.gap_se, 0.0);
}

}  // namespace
}  // namespace allact
