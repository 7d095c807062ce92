#include <benchmark/benchmark.h>

#include <vector>

#include "allact/critic.hpp"
#include "allact/envs.hpp"
#include "allact/estimators.hpp"
#include "allact/nn.hpp"
#include "allact/policy.hpp"

namespace allact {
namespace {

Architecture Net(std::size_t width) { return Architecture::Mlp(3, std::vector<std::size_t>{width, width}, 1); }

void BM_MlpForward(benchmark::State& state) {
  const Architecture arch = Net(static_cast<std::size_t>(state.range(0)));
  Rng rng(1);
  const ParamVector params = InitParams(arch, rng);
  const Vec x{0.1, -0.2, 0.3};
  for (auto _ : state) benchmark::DoNotOptimize(MlpForward(params, arch, x));
}
BENCHMARK(BM_MlpForward)->Arg(8)->Arg(32)->Arg(64);

void BM_MlpBackward(benchmark::State& state) {
  const Architecture arch = Net(static_cast<std::size_t>(state.range(0)));
  Rng rng(1);
  const ParamVector params = InitParams(arch, rng);
  const Vec x{0.1, -0.2, 0.3};
  const Vec up{1.0};
  for (auto _ : state) benchmark::DoNotOptimize(MlpBackward(params, arch, x, up));
}
BENCHMARK(BM_MlpBackward)->Arg(8)->Arg(32)->Arg(64);

// Pendulum-sized actor and critic shared by the estimator benchmarks.
struct Setup {
  EnvSpec spec = DefaultPendulumSpec();
  Rng rng{7};
  GaussianPolicy policy;
  CriticPair critics;
  Vec s{0.1, -0.3};

  Setup()
      : policy(Network(Architecture::Mlp(2, std::vector<std::size_t>{}, 1),
                       ParamVector(std::vector<double>{-1.0, -0.2, 0.0})),
               {0.3}, spec.box),
        critics(CriticPair::Create(2, spec.box, CriticConfig{}, rng)) {}
};

void BM_McEstimate(benchmark::State& state) {
  Setup setup;
  const McSpec spec(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(McEstimate(setup.policy, setup.critics, setup.s, spec, setup.rng));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_McEstimate)->RangeMultiplier(4)->Range(1, 256);

void BM_QuadratureEstimate(benchmark::State& state) {
  Setup setup;
  const QuadratureSpec spec = QuadratureSpec::ForBox(static_cast<std::size_t>(state.range(0)), setup.spec.box);
  for (auto _ : state) benchmark::DoNotOptimize(QuadratureEstimate(setup.policy, setup.critics, setup.s, spec));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_QuadratureEstimate)->RangeMultiplier(4)->Range(16, 256);

void BM_Rollout(benchmark::State& state) {
  Setup setup;
  std::size_t steps = 0;
  for (auto _ : state) {
    const Trajectory t = Rollout(setup.spec, setup.policy, setup.rng);
    steps += t.size();
    benchmark::DoNotOptimize(t);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(steps));
}
BENCHMARK(BM_Rollout);

}  // namespace
}  // namespace allact

BENCHMARK_MAIN();
