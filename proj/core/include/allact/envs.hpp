#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "allact/nn.hpp"
#include "allact/policy.hpp"
#include "allact/rng.hpp"

namespace allact {

enum class EnvKind { kBandit, kLqr, kPendulum };

std::string ToString(EnvKind kind);
EnvKind EnvKindFromString(const std::string& name);

// One-step continuous bandit with expected reward -scale * (clip(a) - target)^2.
struct BanditParams {
  double target = 1.5;
  double noise_std = 0.5;
  double reward_scale = 1.0;
};

// x' = A x + B a, reward -(x'Qc x + a'Rc a) on the pre-step state. Initial state uniform on
// [init_low, init_high]; equal bounds give a point mass.
struct LqrParams {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Eigen::MatrixXd state_cost;
  Eigen::MatrixXd action_cost;
  Vec init_low;
  Vec init_high;
};

// Inverted pendulum, angle measured from upright:
//   angle'' = (g/l) sin(angle) + torque/(m l^2) - damping * angle' / (m l^2)
// integrated with semi-implicit Euler. Per-step reward is
//   alive_bonus - (angle_weight angle^2 + velocity_weight angle'^2 + torque_weight torque^2)
// and the episode ends when |angle| exceeds fall_angle.
struct PendulumParams {
  double mass = 0.1;
  double length = 1.0;
  double gravity = 9.81;
  double damping = 0.0;
  double dt = 0.05;
  double init_angle = 0.2;     // uniform in [-init_angle, init_angle]
  double init_velocity = 0.0;  // uniform in [-init_velocity, init_velocity]
  double fall_angle = 1.0;
  double alive_bonus = 1.0;
  double angle_weight = 1.0;
  double velocity_weight = 0.1;
  double torque_weight = 0.001;
};

struct EnvSpec {
  EnvKind kind = EnvKind::kBandit;
  std::size_t state_dim = 1;
  std::size_t action_dim = 1;
  ActionBox box;
  double gamma = 0.99;
  std::size_t horizon = 1;
  std::variant<BanditParams, LqrParams, PendulumParams> params;

  // Checks gamma, horizon, dimensions against the kind-specific parameters.
  void Validate() const;

  const BanditParams& bandit() const { return std::get<BanditParams>(params); }
  const LqrParams& lqr() const { return std::get<LqrParams>(params); }
  const PendulumParams& pendulum() const { return std::get<PendulumParams>(params); }
};

struct StepResult {
  Vec next_state;
  double reward = 0.0;
  bool done = false;
};

struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;      // executed (clipped)
  std::vector<Vec> raw_actions;  // drawn from the policy before clipping
  Vec rewards;
  Vec returns;                   // G_t = r_t + gamma G_{t+1}, G_{T-1} = r_{T-1}
  std::vector<Vec> next_states;
  std::vector<bool> dones;

  std::size_t size() const { return rewards.size(); }
  double Score() const;  // undiscounted sum of rewards
};

// Default instances.
EnvSpec DefaultBanditSpec();
// Double integrator, dt = 0.1, point-mass start at (1, 0).
EnvSpec DefaultLqrSpec();
EnvSpec DefaultPendulumSpec();
EnvSpec DefaultSpec(EnvKind kind);

Vec EnvReset(const EnvSpec& spec, Rng& rng);
StepResult EnvStep(const EnvSpec& spec, std::span<const double> state,
                   std::span<const double> action, Rng& rng);
Trajectory Rollout(const EnvSpec& spec, const GaussianPolicy& policy, Rng& rng);

// Backward recursion for the returns.
Vec DiscountedReturns(std::span<const double> rewards, double gamma);

// Quadratic model of Q and V for a linear-Gaussian policy on an LQR.
// Q(s, a) = -[s; a; 1]' G [s; a; 1], V(s) = -[s; 1]' P [s; 1].
class LqrValueModel {
 public:
  LqrValueModel(const EnvSpec& spec, const GaussianPolicy& policy, double tol = 1e-10,
                std::size_t max_iters = 1000000);

  double Q(std::span<const double> s, std::span<const double> a) const;
  double V(std::span<const double> s) const;
  double Advantage(std::span<const double> s, std::span<const double> a) const;
  // dQ/da at (s, a).
  Vec ActionGradient(std::span<const double> s, std::span<const double> a) const;

  const Eigen::MatrixXd& q_matrix() const { return g_; }
  std::size_t iterations() const { return iterations_; }

 private:
  std::size_t n_;
  std::size_t m_;
  Eigen::MatrixXd g_;
  Eigen::MatrixXd p_;
  std::size_t iterations_ = 0;
};

double LqrOracleQ(const EnvSpec& spec, const GaussianPolicy& policy, std::span<const double> s,
                  std::span<const double> a);

// Expected reward of the bandit for a raw (pre-clip) action.
double BanditExpectedReward(const EnvSpec& spec, std::span<const double> a);

// Trapezoid over [mu - 8 sigma, mu + 8 sigma] of grad pi(a) * Q(a).
GradVector BanditOracleGradient(const EnvSpec& spec, const GaussianPolicy& policy,
                                std::size_t points = (1u << 14) + 1);

// For the LQR start state s: grad_theta of E_a[Q(s, a)] with Q held fixed,
// i.e. Jacobian' * dQ/da at the mean (exact because Q is quadratic in a).
GradVector LqrOracleGradientAt(const LqrValueModel& model, const GaussianPolicy& policy,
                               std::span<const double> s);

}  // namespace allact
