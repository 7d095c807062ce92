#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "allact/envs.hpp"
#include "allact/nn.hpp"
#include "allact/policy.hpp"
#include "allact/rng.hpp"
#include "allact/stats.hpp"

namespace allact {

// Anything that assigns an advantage to (state, action): learned critics,
// analytic oracles, and test doubles.
class AdvantageFunction {
 public:
  virtual ~AdvantageFunction() = default;
  virtual double Advantage(std::span<const double> s, std::span<const double> a) const = 0;
  // Advantages of several actions at one state. Overridden where per-state
  // work (a baseline evaluation) can be shared.
  virtual void AdvantageBatch(std::span<const double> s, std::span<const Vec> actions,
                              std::span<double> out) const;
};

struct CriticConfig {
  std::vector<std::size_t> hidden{32, 32};
  double lr_q = 0.01;
  double lr_v = 0.01;
  std::size_t expectation_samples = 16;  // K in the expected-SARSA target
  std::size_t v_epochs = 1;
  std::size_t v_batch = 32;
  std::size_t q_passes = 1;
};

// Learned Q over concat(s, a) and V over s. Q is evaluated at the clipped
// action, since the environment only ever sees clipped actions.
class CriticPair : public AdvantageFunction {
 public:
  CriticPair(Network q_net, Network v_net, ActionBox box, const CriticConfig& config);

  static CriticPair Create(std::size_t state_dim, const ActionBox& box,
                           const CriticConfig& config, Rng& rng);

  double QValue(std::span<const double> s, std::span<const double> a) const;
  double Value(std::span<const double> s) const { return v_net_.Scalar(s); }

  double Advantage(std::span<const double> s, std::span<const double> a) const override;
  void AdvantageBatch(std::span<const double> s, std::span<const Vec> actions,
                      std::span<double> out) const override;

  const Network& q_net() const { return q_net_; }
  const Network& v_net() const { return v_net_; }
  Network& mutable_q_net() { return q_net_; }
  Network& mutable_v_net() { return v_net_; }
  const ActionBox& box() const { return box_; }
  const CriticConfig& config() const { return config_; }

 private:
  Network q_net_;
  Network v_net_;
  ActionBox box_;
  CriticConfig config_;
};

struct FitVResult {
  Network net;
  Vec epoch_loss;  // mean pre-update batch loss per epoch
};

// Mini-batch gradient descent on 1/2 (V(s_t) - G_t)^2 over every visited
// state of every trajectory.
FitVResult FitV(Network v_net, std::span<const Trajectory> trajectories, std::size_t epochs,
                double lr, std::size_t batch_size, Rng& rng);

struct Transition {
  std::span<const double> state;
  std::span<const double> action;
  double reward = 0.0;
  std::span<const double> next_state;
  bool done = false;
};

double ExpectedSarsaTarget(const Network& q_net, const Transition& tr,
                           const GaussianPolicy& policy, std::size_t k, double gamma,
                           const ActionBox& box, Rng& rng);

// One semi-gradient step on 1/2 (Q(s, a) - y)^2 with y held constant.
// Returns the target y.
double ExpectedSarsaUpdate(Network& q_net, const Transition& tr, const GaussianPolicy& policy,
                           std::size_t k, double gamma, double lr, const ActionBox& box,
                           Rng& rng);

// One critic round for an episode: fit V on its returns, then one
// expected-SARSA pass over its transitions (q_passes times).
void UpdateCritics(CriticPair& critics, const Trajectory& traj, const GaussianPolicy& policy,
                   double gamma, Rng& rng);

// Exact advantage for the bandit: A(a) = Q(a) - E_{a'~pi}[Q(a')], with the
// expectation taken by high-resolution trapezoid (handles clipping).
class BanditAdvantageOracle : public AdvantageFunction {
 public:
  BanditAdvantageOracle(const EnvSpec& spec, const GaussianPolicy& policy);
  double Advantage(std::span<const double> s, std::span<const double> a) const override;
  double Q(std::span<const double> a) const;
  double value() const { return value_; }

 private:
  EnvSpec spec_;
  double value_ = 0.0;
};

class LqrAdvantageOracle : public AdvantageFunction {
 public:
  LqrAdvantageOracle(const EnvSpec& spec, const GaussianPolicy& policy);
  double Advantage(std::span<const double> s, std::span<const double> a) const override;
  const LqrValueModel& model() const { return model_; }

 private:
  LqrValueModel model_;
};

// Bandit or LQR oracle; UnsupportedError for environments without one.
std::unique_ptr<AdvantageFunction> MakeAdvantageOracle(const EnvSpec& spec,
                                                       const GaussianPolicy& policy);

using StateAction = std::pair<Vec, Vec>;

// (1/n) sum (critic - oracle)^2 with its standard error.
MeanSe AdvantageMse(const AdvantageFunction& critic, const AdvantageFunction& oracle,
                    std::span<const StateAction> sample);

}  // namespace allact
