#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "allact/envs.hpp"
#include "allact/errors.hpp"
#include "allact/policy.hpp"
#include "allact/stats.hpp"

namespace allact {
namespace {

// mean = w' s + b for one action dimension.
GaussianPolicy LinearPolicy(const Vec& w, double b, double sigma, ActionBox box) {
  const Architecture arch = Architecture::Mlp(w.size(), std::vector<std::size_t>{}, 1);
  Vec params = w;
  params.push_back(b);
  return GaussianPolicy(Network(arch, ParamVector(params)), {sigma}, std::move(box));
}

GaussianPolicy MlpPolicy(std::size_t state_dim, std::size_t action_dim, Vec sigma, std::uint64_t seed) {
  const Architecture arch = Architecture::Mlp(state_dim, std::vector<std::size_t>{6, 4}, action_dim);
  Rng rng(seed);
  ParamVector p = InitParams(arch, rng);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] += 0.2 * rng.Normal();
  return GaussianPolicy(Network(arch, p), std::move(sigma),
                        ActionBox(Vec(action_dim, -5.0), Vec(action_dim, 5.0)));
}

const ActionBox kWide({-100.0}, {100.0});
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

TEST(LogProb, StandardNormalAtMode) {
  const GaussianPolicy pi = LinearPolicy({0.5}, 0.2, 1.0, kWide);
  const Vec s{1.0};
  EXPECT_NEAR(pi.LogProb(s, pi.Mean(s)), -kLogSqrt2Pi, 1e-12);
  EXPECT_NEAR(pi.LogProb(s, Vec{pi.Mean(s)[0] + 1.0}), -0.5 - kLogSqrt2Pi, 1e-12);
}

TEST(LogProb, TwoDimensionsIsProductOfMarginals) {
  const GaussianPolicy pi = MlpPolicy(3, 2, {0.5, 2.0}, 11);
  const Vec s{0.1, -0.4, 0.9};
  const Vec mu = pi.Mean(s);
  const Vec a{mu[0] + 0.3, mu[1] - 1.7};
  auto log_normal = [](double x, double m, double sd) {
    return -0.5 * std::pow((x - m) / sd, 2) - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
  };
  EXPECT_NEAR(pi.LogProb(s, a), log_normal(a[0], mu[0], 0.5) + log_normal(a[1], mu[1], 2.0), 1e-12);
}

TEST(Score, ZeroAtMode) {
  const GaussianPolicy pi = MlpPolicy(2, 1, {0.7}, 12);
  const Vec s{0.3, 0.3};
  for (double v : pi.Score(s, pi.Mean(s))) EXPECT_EQ(v, 0.0);
}

TEST(Score, LinearGaussianClosedForm) {
  const GaussianPolicy pi = LinearPolicy({0.5, -1.0}, 0.0, 0.8, kWide);
  const Vec s{2.0, 0.5};
  const double a = 1.7;
  const double coef = (a - pi.Mean(s)[0]) / (0.8 * 0.8);
  const GradVector g = pi.Score(s, Vec{a});
  EXPECT_NEAR(g[0], coef * s[0], 1e-12);
  EXPECT_NEAR(g[1], coef * s[1], 1e-12);
  EXPECT_NEAR(g[2], coef, 1e-12);  // bias input is 1
}

TEST(Score, MatchesFiniteDifferenceOfLogProb) {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t da = 1 + rng.Index(2);
    GaussianPolicy pi = MlpPolicy(2, da, Vec(da, 0.3 + rng.Uniform(0.0, 1.0)), 100 + trial);
    const Vec s{rng.Normal(), rng.Normal()};
    const Vec a = pi.SampleRaw(s, rng);
    const GradVector analytic = pi.Score(s, a);
    GaussianPolicy probe = pi;
    const GradVector numeric = FiniteDiffGradient(
        [&](const ParamVector& p) {
          probe.set_params(p);
          return probe.LogProb(s, a);
        },
        pi.params(), 1e-6);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-6});
      EXPECT_LT(std::abs(analytic[i] - numeric[i]) / scale, 1e-5) << "trial " << trial << " i " << i;
    }
  }
}

TEST(Score, JacobianAccumulationMatchesScore) {
  const GaussianPolicy pi = MlpPolicy(2, 2, {0.4, 0.9}, 14);
  const Vec s{0.5, -0.5};
  const Vec a{0.2, 1.1};
  const MeanJacobian jac = pi.Jacobian(s);
  GradVector acc(pi.param_dim());
  jac.AccumulateScore(a, pi.sigma(), 2.0, acc);
  const GradVector direct = pi.Score(s, a);
  for (std::size_t i = 0; i < acc.size(); ++i) EXPECT_NEAR(acc[i], 2.0 * direct[i], 1e-12);
}

TEST(Sample, TinySigmaReturnsClippedMean) {
  const GaussianPolicy pi = LinearPolicy({1.0}, 0.0, 1e-12, ActionBox({-1.0}, {1.0}));
  Rng rng(15);
  EXPECT_NEAR(pi.Sample(Vec{0.4}, rng)[0], 0.4, 1e-9);
  EXPECT_EQ(pi.Sample(Vec{3.0}, rng)[0], 1.0);
}

TEST(Sample, EmpiricalMeanWithinThreeSe) {
  const GaussianPolicy pi = LinearPolicy({0.5}, 0.25, 0.7, kWide);
  const Vec s{1.0};
  Rng rng(16);
  Vec draws(100000);
  for (double& d : draws) d = pi.Sample(s, rng)[0];
  const MeanSe ms = MeanWithSe(draws);
  EXPECT_LT(std::abs(ms.mean - pi.Mean(s)[0]), 3.0 * ms.se);
}

TEST(Sample, MeanFarOutsideBoxSaturates) {
  const Architecture arch = Architecture::Mlp(1, std::vector<std::size_t>{}, 2);
  const GaussianPolicy pi(Network(arch, ParamVector(std::vector<double>{0, 0, 50.0, -50.0})), {1.0, 1.0},
                          ActionBox({-2.0, -3.0}, {2.0, 3.0}));
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const Vec a = pi.Sample(Vec{0.0}, rng);
    EXPECT_EQ(a[0], 2.0);
    EXPECT_EQ(a[1], -3.0);
  }
}

TEST(Policy, RejectsBadSigmaAndBox) {
  const Architecture arch = Architecture::Mlp(1, std::vector<std::size_t>{}, 1);
  const Network net(arch, ParamVector(arch.param_count(), 0.0));
  EXPECT_THROW(GaussianPolicy(net, {0.0}, ActionBox({-1.0}, {1.0})), ArgumentError);
  EXPECT_THROW(ActionBox({1.0}, {1.0}), ArgumentError);
  EXPECT_THROW(GaussianPolicy(net, {1.0, 1.0}, ActionBox({-1.0, -1.0}, {1.0, 1.0})), ShapeError);
}

// With the bias input the linear score is (a - mu) [s; 1] / sigma^2, so a
// unit-norm state and a box of half-width 2 give 1.1 * 4 * (1 + 1).
TEST(ScoreNormBound, LinearUnitState) {
  const GaussianPolicy pi = LinearPolicy({1.0}, 0.0, 1.0, ActionBox({-1.0}, {3.0}));
  const std::vector<Vec> states{{1.0}};
  EXPECT_NEAR(ScoreNormBound(pi, states).m, 1.1 * 4.0 * 2.0, 1e-9);
}

TEST(ScoreNormBound, DoublingSigmaDividesBySixteen) {
  const std::vector<Vec> states{{1.0}};
  const GaussianPolicy a = LinearPolicy({1.0}, 0.0, 1.0, ActionBox({-1.0}, {3.0}));
  const GaussianPolicy b = LinearPolicy({1.0}, 0.0, 2.0, ActionBox({-1.0}, {3.0}));
  EXPECT_NEAR(ScoreNormBound(b, states).m, ScoreNormBound(a, states).m / 16.0, 1e-9);
}

TEST(ScoreNormBound, PendulumMlpAgreesWithFinerGrid) {
  const EnvSpec spec = DefaultPendulumSpec();
  const Architecture arch = Architecture::Mlp(2, std::vector<std::size_t>{8}, 1);
  Rng rng(18);
  const GaussianPolicy pi(Network(arch, InitParams(arch, rng)), {0.3}, spec.box);
  std::vector<Vec> states;
  for (int i = 0; i < 20; ++i) states.push_back(EnvReset(spec, rng));
  const double coarse = ScoreNormBound(pi, states, 64).m;
  const double fine = ScoreNormBound(pi, states, 640).m;
  EXPECT_GE(coarse * kScoreBoundSafety, fine);
  EXPECT_LE(coarse, fine * kScoreBoundSafety);
}

}  // namespace
}  // namespace allact
