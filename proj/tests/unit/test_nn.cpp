#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "allact/errors.hpp"
#include "allact/nn.hpp"
#include "allact/rng.hpp"

namespace allact {
namespace {

double MaxRelError(const GradVector& a, const GradVector& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

TEST(MlpForward, ZeroParamsGiveZeroOutput) {
  const std::vector<std::size_t> hidden{4, 3};
  const Architecture arch = Architecture::Mlp(2, hidden, 2);
  const ParamVector params(arch.param_count(), 0.0);
  const std::vector<double> y = MlpForward(params, arch, std::vector<double>{0.7, -1.3});
  ASSERT_EQ(y.size(), 2u);
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 0.0);
}

TEST(MlpForward, IdentityLayer) {
  const Architecture arch({LayerSpec{2, 2, Activation::kIdentity}});
  const ParamVector params(std::vector<double>{1, 0, 0, 1, 0, 0});
  const std::vector<double> y = MlpForward(params, arch, std::vector<double>{0.3, -0.2});
  EXPECT_DOUBLE_EQ(y[0], 0.3);
  EXPECT_DOUBLE_EQ(y[1], -0.2);
}

TEST(MlpForward, HandComputedTwoLayerNet) {
  const std::vector<std::size_t> hidden{2};
  const Architecture arch = Architecture::Mlp(1, hidden, 1);
  // layer 0: W = [0.5; -0.3], b = [0.1, 0.2]; layer 1: W = [0.7, -1.1], b = 0.05
  const ParamVector params(std::vector<double>{0.5, -0.3, 0.1, 0.2, 0.7, -1.1, 0.05});
  const double x = 0.8;
  const double expected = 0.7 * std::tanh(0.5 * x + 0.1) - 1.1 * std::tanh(-0.3 * x + 0.2) + 0.05;
  EXPECT_NEAR(MlpForward(params, arch, std::vector<double>{x})[0], expected, 1e-12);
}

TEST(MlpForward, WrongInputWidthThrowsShapeError) {
  const Architecture arch = Architecture::Mlp(3, std::vector<std::size_t>{}, 1);
  const ParamVector params(arch.param_count(), 0.1);
  EXPECT_THROW(MlpForward(params, arch, std::vector<double>{1.0}), ShapeError);
}

TEST(Architecture, LayersThatDoNotChainReportTheLayer) {
  try {
    Architecture arch({LayerSpec{2, 3, Activation::kTanh}, LayerSpec{4, 1, Activation::kIdentity}});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_EQ(e.layer(), 1u);
  }
}

TEST(MlpBackward, LinearLayerIsOuterProduct) {
  const Architecture arch({LayerSpec{3, 2, Activation::kIdentity}});
  Rng rng(1);
  const ParamVector params = InitParams(arch, rng);
  const std::vector<double> x{0.2, -0.5, 1.5};
  const std::vector<double> g{0.7, -2.0};
  const GradVector grad = MlpBackward(params, arch, x, g);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(grad[o * 3 + i], g[o] * x[i]);
    EXPECT_DOUBLE_EQ(grad[6 + o], g[o]);
  }
}

TEST(MlpBackward, ZeroUpstreamGivesZeroGradient) {
  const Architecture arch = Architecture::Mlp(2, std::vector<std::size_t>{5}, 2);
  Rng rng(2);
  const ParamVector params = InitParams(arch, rng);
  const GradVector grad = MlpBackward(params, arch, std::vector<double>{1.0, 2.0}, std::vector<double>{0.0, 0.0});
  for (double v : grad) EXPECT_EQ(v, 0.0);
}

TEST(MlpBackward, MatchesFiniteDifferencesOnRandomNets) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t in = 1 + rng.Index(3);
    const std::size_t out = 1 + rng.Index(2);
    const std::vector<std::size_t> hidden{1 + rng.Index(6), 1 + rng.Index(6)};
    const Architecture arch = Architecture::Mlp(in, hidden, out);
    ParamVector params = InitParams(arch, rng);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += 0.1 * rng.Normal();
    std::vector<double> x(in), up(out);
    for (double& v : x) v = rng.Normal();
    for (double& v : up) v = rng.Normal();
    const GradVector analytic = MlpBackward(params, arch, x, up);
    const GradVector numeric = FiniteDiffGradient(
        [&](const ParamVector& p) {
          const std::vector<double> y = MlpForward(p, arch, x);
          double s = 0.0;
          for (std::size_t k = 0; k < out; ++k) s += up[k] * y[k];
          return s;
        },
        params, 1e-6);
    EXPECT_LT(MaxRelError(analytic, numeric), 1e-5) << "trial " << trial;
  }
}

TEST(FiniteDiffGradient, Quadratic) {
  const GradVector g = FiniteDiffGradient(
      [](const ParamVector& p) { return p[0] * p[0] + p[1] * p[1]; },
      ParamVector(std::vector<double>{1.0, 2.0}), 1e-5);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);
}

TEST(FiniteDiffGradient, ConstantIsZero) {
  const GradVector g = FiniteDiffGradient([](const ParamVector&) { return 3.0; },
                                          ParamVector(std::vector<double>{1.0, -1.0, 4.0}), 1e-5);
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDiffGradient, SineProduct) {
  const GradVector g = FiniteDiffGradient(
      [](const ParamVector& p) { return std::sin(p[0]) * p[1]; },
      ParamVector(std::vector<double>{0.5, 2.0}), 1e-5);
  EXPECT_NEAR(g[0], 2.0 * std::cos(0.5), 1e-8);
  EXPECT_NEAR(g[1], std::sin(0.5), 1e-8);
}

TEST(FiniteDiffGradient, NonPositiveStepRejected) {
  EXPECT_THROW(FiniteDiffGradient([](const ParamVector&) { return 0.0; },
                                  ParamVector(std::vector<double>{1.0}), 0.0),
               ArgumentError);
}

TEST(Params, FlattenRoundTripsTheLayout) {
  const Architecture arch = Architecture::Mlp(3, std::vector<std::size_t>{4}, 2);
  Rng rng(4);
  const ParamVector params = InitParams(arch, rng);
  const std::vector<LayerParams> layers = Unflatten(params, arch);
  ASSERT_EQ(layers.size(), 2u);
  // W[o][i] of layer 1 at offset(1) + o * in + i.
  EXPECT_EQ(layers[1].weights[1 * 4 + 2], params[arch.offset(1) + 1 * 4 + 2]);
  EXPECT_EQ(Flatten(layers, arch), params);
}

TEST(Params, InitBiasesAreZeroAndWeightsBounded) {
  const Architecture arch = Architecture::Mlp(4, std::vector<std::size_t>{8}, 1);
  Rng rng(5);
  const std::vector<LayerParams> layers = Unflatten(InitParams(arch, rng, 1.0), arch);
  for (double b : layers[0].bias) EXPECT_EQ(b, 0.0);
  for (double w : layers[0].weights) EXPECT_LE(std::abs(w), 0.5);
}

TEST(Rng, SplitDependsOnlyOnSeedAndStream) {
  Rng a(42);
  a.Normal();
  const Rng b(42);
  Rng x = a.Split(7);
  Rng y = b.Split(7);
  EXPECT_EQ(x.Normal(), y.Normal());
  EXPECT_NE(DeriveSeed(42, 1), DeriveSeed(42, 2));
}

}  // namespace
}  // namespace allact
