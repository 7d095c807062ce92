#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "allact/critic.hpp"
#include "allact/envs.hpp"
#include "allact/estimators.hpp"
#include "allact/nn.hpp"
#include "allact/policy.hpp"
#include "allact/rng.hpp"

namespace allact {

// kTrajectory averages over every visited state of a rollout. kStartState
// looks only at t = 0 (REINFORCE term score(s0, a0)(G0 - b(s0)), all-action
// estimate at s0); it needs a deterministic initial state.
enum class ReferenceMode { kTrajectory, kStartState };

struct ReferenceResult {
  GradVector mean;
  GradVector se;  // componentwise standard error
  std::size_t n_rollouts = 0;
};

// The deterministic initial state; ArgumentError when the reset distribution
// is not a point mass.
Vec StartState(const EnvSpec& spec);

// Average of n_rollouts independent REINFORCE estimates. Rollout i draws from
// rng.Split(i), so the result does not depend on evaluation order.
ReferenceResult ReferenceGradient(const EnvSpec& spec, const GaussianPolicy& policy,
                                  const Baseline& baseline, std::size_t n_rollouts,
                                  const Rng& rng, ReferenceMode mode = ReferenceMode::kTrajectory);

// Gradient of E_a[Q(s0, a)] with the exact Q: quadrature for the bandit, the
// quadratic model for the LQR. UnsupportedError otherwise.
GradVector OracleGradient(const EnvSpec& spec, const GaussianPolicy& policy);

struct MseSweepRow {
  std::size_t n_s = 0;
  double mse = 0.0;
  std::size_t n_estimates = 0;
  double se = 0.0;
  double reference_norm = 0.0;
};

struct MseSweepOptions {
  ReferenceMode mode = ReferenceMode::kTrajectory;
  // kQuadrature substitutes an N-point grid for the N_S samples.
  EstimatorKind kind = EstimatorKind::kMc;
};

// Cell (N_S, i) draws a fresh rollout and fresh actions from
// rng.Split(N_S).Split(i).
std::vector<MseSweepRow> MseSweep(const EnvSpec& spec, const GaussianPolicy& policy,
                                  const AdvantageFunction& adv, std::span<const std::size_t> ns_list,
                                  std::size_t n_estimates, const GradVector& reference,
                                  const Rng& rng, const MseSweepOptions& options = {});

struct InverseNFit {
  double c0 = 0.0;
  double c1 = 0.0;
  double r_squared = 0.0;
};

// Least squares mse ~ c0 + c1 / N_S.
InverseNFit FitInverseN(std::span<const MseSweepRow> rows);

struct TheoremTerms {
  double m = 0.0;      // score-norm bound
  double l_adv = 0.0;  // advantage MSE
  double l = 0.0;      // MSE of the exact-advantage single-sample term
  double xi = 0.0;     // return-noise bound
  std::size_t d = 0;
  std::size_t n_s = 0;
};

struct TheoremCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;  // combined standard error used for the 3 SE slack
  TheoremTerms terms;
  bool satisfied = false;
};

struct Theorem1Options {
  std::vector<std::size_t> ns_list{1, 8, 64};
  std::size_t n_estimates = 1000;
  std::size_t n_reference = 10000;
  std::size_t n_term_samples = 10000;  // draws for L and the advantage MSE
  std::size_t score_grid = 64;
};

struct Theorem1Report {
  std::vector<TheoremCheck> checks;
  double slope = 0.0;  // log-log slope of lhs against N_S
  GradVector reference;
  bool satisfied = false;
};

// Start-state protocol throughout: lhs is the sweep MSE at s0 against a
// REINFORCE reference, L is measured against the same reference.
Theorem1Report Theorem1Check(const EnvSpec& spec, const GaussianPolicy& policy,
                             const AdvantageFunction& critic, const Baseline& baseline,
                             const AdvantageFunction& oracle, const Theorem1Options& options,
                             const Rng& rng);

struct Theorem2Report {
  TheoremCheck check;
  double l_r = 0.0;
  double l_r_se = 0.0;
  double xi_se = 0.0;
};

// Per rollout: R = score(s0, a0)(G0 - b(s0)), O = score(s0, a0) A(s0, a0),
// xi term (G0 - b(s0) - A(s0, a0))^2; both MSEs against the oracle gradient.
// The verdict uses the paired difference L_R - L - M xi and its SE.
Theorem2Report Theorem2Check(const EnvSpec& spec, const GaussianPolicy& policy,
                             const Baseline& baseline, const AdvantageFunction& oracle,
                             const GradVector& oracle_gradient, std::size_t n_rollouts,
                             const Rng& rng, std::size_t score_grid = 64);

// J(theta) = 1/2 theta' H theta + b' theta with H negative semidefinite.
struct QuadraticObjective {
  Eigen::MatrixXd h;
  Eigen::VectorXd b;

  QuadraticObjective(Eigen::MatrixXd h, Eigen::VectorXd b);
  double Value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd Gradient(const Eigen::VectorXd& theta) const;
  double Smoothness() const { return mu_; }

 private:
  double mu_ = 0.0;
};

// The displayed lower bound on E[J(theta_{k+1})]:
// J + 1/2 |g|^2 + (1/mu) [(g - bias/2) . bias - tr Var].
double Theorem3DisplayedBound(double j, const Eigen::VectorXd& grad, const Eigen::VectorXd& bias,
                              double trace_var, double mu);
// The bound that follows from mu-smoothness for delta <= 1/mu:
// J + delta g.(g + bias) - mu delta^2 / 2 (|g + bias|^2 + tr Var).
double Theorem3SmoothnessBound(double j, const Eigen::VectorXd& grad, const Eigen::VectorXd& bias,
                               double trace_var, double mu, double delta);

struct Theorem3Point {
  Eigen::VectorXd theta;
  double j = 0.0;
  double empirical_mean = 0.0;
  double empirical_se = 0.0;
  double closed_form = 0.0;
  double bound = 0.0;
  double smoothness_bound = 0.0;
  double margin = 0.0;  // empirical_mean - bound
  bool bound_satisfied = false;
  bool closed_form_match = false;
};

struct Theorem3Report {
  std::vector<Theorem3Point> points;
  double mu = 0.0;
  double delta = 0.0;
  double bias_norm = 0.0;
  double noise_trace = 0.0;
  bool bound_satisfied = false;
  bool closed_form_match = false;
};

using BiasFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

// One ascent step from each theta: g_hat = grad J + bias(theta) + noise with
// noise ~ N(0, noise_cov), averaged over n_trials.
Theorem3Report Theorem3Check(const QuadraticObjective& objective, const BiasFn& bias_fn,
                             const Eigen::MatrixXd& noise_cov, double delta,
                             std::span<const Eigen::VectorXd> thetas, std::size_t n_trials,
                             const Rng& rng);

// The fixed 5-dimensional instance used by the CLI and the acceptance suite:
// eigenvalues {-1, -0.75, -0.5, -0.25, -0.1} in a random orthonormal basis,
// maximizer (1, -1, 0.5, 0, 2), evaluation points at unit distance from it in
// random directions, and a fixed random unit bias direction.
struct Theorem3Problem {
  QuadraticObjective objective;
  std::vector<Eigen::VectorXd> thetas;
  Eigen::VectorXd bias_direction;
};

Theorem3Problem MakeTheorem3Problem(const Rng& rng, std::size_t n_points = 5);

struct Theorem3Cell {
  double bias_magnitude = 0.0;
  double noise_scale = 0.0;
  Theorem3Report report;
};

// Grid over (bias magnitude, isotropic noise scale) with delta = 1/mu.
std::vector<Theorem3Cell> Theorem3Grid(const Theorem3Problem& problem,
                                       std::span<const double> bias_magnitudes,
                                       std::span<const double> noise_scales,
                                       std::size_t n_trials, const Rng& rng);

}  // namespace allact
