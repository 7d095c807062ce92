#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "allact/critic.hpp"
#include "allact/envs.hpp"
#include "allact/nn.hpp"
#include "allact/policy.hpp"
#include "allact/rng.hpp"

namespace allact {

enum class EstimatorKind { kReinforce, kQuadrature, kMc };

std::string ToString(EstimatorKind kind);
EstimatorKind EstimatorKindFromString(const std::string& name);

struct GradientEstimate {
  GradVector grad;
  EstimatorKind kind = EstimatorKind::kReinforce;
  std::size_t samples_per_state = 0;  // N for quadrature, N_S for MC, 1 for REINFORCE
  std::size_t n_states = 0;
  std::uint64_t seed = 0;
};

// Baseline evaluated at a state; usually a V network.
using Baseline = std::function<double(std::span<const double>)>;
Baseline NetworkBaseline(const Network& v_net);

// (1/T) sum_t score(s_t, a_t) (G_t - b(s_t)), scored at the raw action drawn
// from the policy.
GradientEstimate ReinforceEstimate(const Trajectory& traj, const GaussianPolicy& policy,
                                   const Baseline& baseline);
GradientEstimate ReinforceEstimate(const Trajectory& traj, const GaussianPolicy& policy,
                                   const Network& v_net);

// N evenly spaced points over [low, high] with trapezoid weights.
struct QuadratureSpec {
  std::size_t n = 0;
  Vec grid;
  Vec weights;

  QuadratureSpec(std::size_t n, double low, double high);
  static QuadratureSpec ForBox(std::size_t n, const ActionBox& box);
};

struct McSpec {
  std::size_t n_samples = 1;
  explicit McSpec(std::size_t n) : n_samples(n) {}
};

// sum_i w_i pi(a_i|s) score(s, a_i) A(s, a_i). One-dimensional actions only.
GradientEstimate QuadratureEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                                    std::span<const double> s, const QuadratureSpec& spec);

// (1/N_S) sum_k score(s, a_k) A(s, a_k) with a_k drawn unclipped from pi(.|s).
GradientEstimate McEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                            std::span<const double> s, const McSpec& spec, Rng& rng);

// Which per-state all-action estimator to apply and its resolution.
struct AllActionConfig {
  EstimatorKind kind = EstimatorKind::kMc;
  std::size_t n = 1;
};

GradientEstimate StateEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                               std::span<const double> s, const AllActionConfig& config, Rng& rng);

// (1/T) sum_t Z(s_t) over the states visited by the trajectory.
GradientEstimate TrajectoryEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                                    const Trajectory& traj, const AllActionConfig& config,
                                    Rng& rng);

struct VarianceReport {
  double var_state = 0.0;          // trace covariance of the per-state means
  double expected_cond_var = 0.0;  // mean over states of the within-state trace covariance
  double total_var = 0.0;          // trace covariance of all draws pooled
  double gap_se = 0.0;             // jackknife (over states) SE of total_var - var_state
  std::size_t n_states = 0;
  std::size_t reps = 0;
};

// A per-state estimator draw; the decomposition treats it as a black box.
using StateDraw = std::function<GradVector(std::span<const double> s, Rng& rng)>;

// Moments are those of the empirical distribution that puts mass 1/S on each
// state and 1/reps on each replicate, computed directly from the draws. The
// pooled total is accumulated independently of the two parts. Replicate r of
// state j uses its own derived stream.
VarianceReport VarianceDecomposition(const StateDraw& draw, std::span<const Vec> states,
                                     std::size_t reps, const Rng& rng);

VarianceReport VarianceDecomposition(const GaussianPolicy& policy, const AdvantageFunction& adv,
                                     std::span<const Vec> states, const McSpec& spec,
                                     std::size_t reps, const Rng& rng);

}  // namespace allact
