#include "allact/estimators.hpp"

#include <cmath>

#include "allact/errors.hpp"
#include "allact/stats.hpp"

namespace allact {

std::string ToString(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::kReinforce:
      return "reinforce";
    case EstimatorKind::kQuadrature:
      return "quadrature";
    case EstimatorKind::kMc:
      return "mc";
  }
  return "unknown";
}

EstimatorKind EstimatorKindFromString(const std::string& name) {
  if (name == "reinforce") return EstimatorKind::kReinforce;
  if (name == "quadrature" || name == "quad") return EstimatorKind::kQuadrature;
  if (name == "mc") return EstimatorKind::kMc;
  throw ArgumentError("unknown estimator '" + name + "' (expected reinforce, quadrature, mc)");
}

Baseline NetworkBaseline(const Network& v_net) {
  return [&v_net](std::span<const double> s) { return v_net.Scalar(s); };
}

namespace {

void RequireFinite(const GradVector& g, const char* what) {
  if (!AllFinite(g.span())) throw NumericError(std::string(what) + " produced a non-finite gradient");
}

}  // namespace

GradientEstimate ReinforceEstimate(const Trajectory& traj, const GaussianPolicy& policy,
                                   const Baseline& baseline) {
  if (traj.size() == 0) throw ArgumentError("REINFORCE needs a nonempty trajectory");
  GradientEstimate est{GradVector(policy.param_dim()), EstimatorKind::kReinforce, 1, traj.size(), 0};
  Vec upstream(policy.action_dim());
  const Vec& sigma = policy.sigma();
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const Vec& s = traj.states[t];
    const double coef = traj.returns[t] - baseline(s);
    if (coef == 0.0) continue;
    const Vec mu = policy.Mean(s);
    for (std::size_t i = 0; i < upstream.size(); ++i) {
      upstream[i] = coef * (traj.raw_actions[t][i] - mu[i]) / (sigma[i] * sigma[i]);
    }
    Axpy(1.0, policy.mean_net().Backward(s, upstream), est.grad);
  }
  const double inv_t = 1.0 / static_cast<double>(traj.size());
  for (std::size_t i = 0; i < est.grad.size(); ++i) est.grad[i] *= inv_t;
  RequireFinite(est.grad, "REINFORCE");
  return est;
}

GradientEstimate ReinforceEstimate(const Trajectory& traj, const GaussianPolicy& policy,
                                   const Network& v_net) {
  return ReinforceEstimate(traj, policy, NetworkBaseline(v_net));
}

QuadratureSpec::QuadratureSpec(std::size_t points, double low, double high) : n(points) {
  if (n < 2) throw ArgumentError("quadrature needs N >= 2 grid points");
  if (!(low < high)) throw ArgumentError("quadrature interval must have low < high");
  const double h = (high - low) / static_cast<double>(n - 1);
  grid.resize(n);
  weights.assign(n, h);
  for (std::size_t i = 0; i < n; ++i) grid[i] = low + h * static_cast<double>(i);
  grid.back() = high;
  weights.front() = weights.back() = 0.5 * h;
}

QuadratureSpec QuadratureSpec::ForBox(std::size_t points, const ActionBox& box) {
  if (box.dim() != 1) {
    throw UnsupportedError("fixed-grid quadrature supports one-dimensional actions only");
  }
  return QuadratureSpec(points, box.low[0], box.high[0]);
}

GradientEstimate QuadratureEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                                    std::span<const double> s, const QuadratureSpec& spec) {
  if (policy.action_dim() != 1) {
    throw UnsupportedError("fixed-grid quadrature supports one-dimensional actions only");
  }
  const MeanJacobian jac = policy.Jacobian(s);
  const double mu = jac.mean[0];
  const double var = policy.sigma()[0] * policy.sigma()[0];
  std::vector<Vec> actions(spec.n, Vec(1));
  for (std::size_t i = 0; i < spec.n; ++i) actions[i][0] = spec.grid[i];
  Vec a_hat(spec.n);
  adv.AdvantageBatch(s, actions, a_hat);
  // grad pi(a) = pi(a) (a - mu) / sigma^2 * d mu / d theta, so the whole sum
  // collapses onto the single Jacobian row.
  CompensatedSum coef;
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double p = policy.Density(jac.mean, actions[i]);
    coef.Add(spec.weights[i] * p * (spec.grid[i] - mu) / var * a_hat[i]);
  }
  GradientEstimate est{GradVector(policy.param_dim()), EstimatorKind::kQuadrature, spec.n, 1, 0};
  Axpy(coef.value(), jac.rows[0], est.grad);
  RequireFinite(est.grad, "quadrature");
  return est;
}

GradientEstimate McEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                            std::span<const double> s, const McSpec& spec, Rng& rng) {
  if (spec.n_samples < 1) throw ArgumentError("Monte Carlo estimator needs N_S >= 1");
  const MeanJacobian jac = policy.Jacobian(s);
  std::vector<Vec> actions(spec.n_samples);
  for (Vec& a : actions) a = policy.SampleRawAround(jac.mean, rng);
  Vec a_hat(spec.n_samples);
  adv.AdvantageBatch(s, actions, a_hat);

  const Vec& sigma = policy.sigma();
  const std::size_t da = policy.action_dim();
  GradientEstimate est{GradVector(policy.param_dim()), EstimatorKind::kMc, spec.n_samples, 1,
                       rng.seed()};
  const double inv_n = 1.0 / static_cast<double>(spec.n_samples);
  for (std::size_t i = 0; i < da; ++i) {
    double coef = 0.0;
    for (std::size_t k = 0; k < spec.n_samples; ++k) {
      coef += (actions[k][i] - jac.mean[i]) / (sigma[i] * sigma[i]) * a_hat[k];
    }
    Axpy(coef * inv_n, jac.rows[i], est.grad);
  }
  RequireFinite(est.grad, "Monte Carlo");
  return est;
}

GradientEstimate StateEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                               std::span<const double> s, const AllActionConfig& config,
                               Rng& rng) {
  switch (config.kind) {
    case EstimatorKind::kMc:
      return McEstimate(policy, adv, s, McSpec(config.n), rng);
    case EstimatorKind::kQuadrature:
      return QuadratureEstimate(policy, adv, s, QuadratureSpec::ForBox(config.n, policy.box()));
    case EstimatorKind::kReinforce:
      break;
  }
  throw ArgumentError("REINFORCE is not a per-state all-action estimator");
}

GradientEstimate TrajectoryEstimate(const GaussianPolicy& policy, const AdvantageFunction& adv,
                                    const Trajectory& traj, const AllActionConfig& config,
                                    Rng& rng) {
  if (traj.size() == 0) throw ArgumentError("all-action estimate needs a nonempty trajectory");
  GradientEstimate est{GradVector(policy.param_dim()), config.kind, config.n, traj.size(),
                       rng.seed()};
  for (const Vec& s : traj.states) {
    Axpy(1.0, StateEstimate(policy, adv, s, config, rng).grad, est.grad);
  }
  const double inv_t = 1.0 / static_cast<double>(traj.size());
  for (std::size_t i = 0; i < est.grad.size(); ++i) est.grad[i] *= inv_t;
  return est;
}

VarianceReport VarianceDecomposition(const StateDraw& draw, std::span<const Vec> states,
                                     std::size_t reps, const Rng& rng) {
  if (states.empty()) throw ArgumentError("variance decomposition needs at least one state");
  if (reps < 2) throw ArgumentError("variance decomposition needs reps >= 2");
  const std::size_t n_states = states.size();

  std::vector<std::vector<GradVector>> draws(n_states);
  for (std::size_t j = 0; j < n_states; ++j) {
    const Rng state_rng = rng.Split(j);
    draws[j].reserve(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      Rng cell = state_rng.Split(r);
      draws[j].push_back(draw(states[j], cell));
    }
  }
  const std::size_t d = draws[0][0].size();

  // Per-state means and within-state (population) trace variances.
  std::vector<GradVector> means(n_states, GradVector(d));
  Vec within(n_states, 0.0);
  for (std::size_t j = 0; j < n_states; ++j) {
    for (std::size_t c = 0; c < d; ++c) {
      CompensatedSum s;
      for (const GradVector& g : draws[j]) s.Add(g[c]);
      means[j][c] = s.value() / static_cast<double>(reps);
    }
    CompensatedSum w;
    for (const GradVector& g : draws[j]) w.Add(SquaredDistance(g, means[j]));
    within[j] = w.value() / static_cast<double>(reps);
  }

  auto summarize = [&](std::size_t skip) {
    const double count = static_cast<double>(skip < n_states ? n_states - 1 : n_states);
    GradVector grand(d);
    for (std::size_t j = 0; j < n_states; ++j) {
      if (j != skip) Axpy(1.0 / count, means[j], grand);
    }
    CompensatedSum between;
    CompensatedSum cond;
    CompensatedSum pooled;
    for (std::size_t j = 0; j < n_states; ++j) {
      if (j == skip) continue;
      between.Add(SquaredDistance(means[j], grand));
      cond.Add(within[j]);
      for (const GradVector& g : draws[j]) pooled.Add(SquaredDistance(g, grand));
    }
    VarianceReport out;
    out.var_state = between.value() / count;
    out.expected_cond_var = cond.value() / count;
    out.total_var = pooled.value() / (count * static_cast<double>(reps));
    return out;
  };

  VarianceReport report = summarize(n_states);
  report.n_states = n_states;
  report.reps = reps;
  if (n_states >= 2) {
    Vec gaps(n_states);
    for (std::size_t j = 0; j < n_states; ++j) {
      const VarianceReport loo = summarize(j);
      gaps[j] = loo.total_var - loo.var_state;
    }
    const double m = Mean(gaps);
    double ss = 0.0;
    for (double g : gaps) ss += (g - m) * (g - m);
    report.gap_se = std::sqrt(ss * static_cast<double>(n_states - 1) / static_cast<double>(n_states));
  }
  return report;
}

VarianceReport VarianceDecomposition(const GaussianPolicy& policy, const AdvantageFunction& adv,
                                     std::span<const Vec> states, const McSpec& spec,
                                     std::size_t reps, const Rng& rng) {
  if (spec.n_samples < 1) throw ArgumentError("Monte Carlo estimator needs N_S >= 1");
  return VarianceDecomposition(
      [&](std::span<const double> s, Rng& r) { return McEstimate(policy, adv, s, spec, r).grad; },
      states, reps, rng);
}

}  // namespace allact
