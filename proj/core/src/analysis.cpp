#include "allact/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "allact/errors.hpp"
#include "allact/stats.hpp"

namespace allact {

Vec StartState(const EnvSpec& spec) {
  switch (spec.kind) {
    case EnvKind::kBandit:
      return Vec(spec.state_dim, 0.0);
    case EnvKind::kLqr: {
      const LqrParams& p = spec.lqr();
      if (p.init_low != p.init_high) {
        throw ArgumentError("start-state protocol needs a point-mass initial state");
      }
      return p.init_low;
    }
    case EnvKind::kPendulum: {
      const PendulumParams& p = spec.pendulum();
      if (p.init_angle != 0.0 || p.init_velocity != 0.0) {
        throw ArgumentError("start-state protocol needs a point-mass initial state");
      }
      return Vec(spec.state_dim, 0.0);
    }
  }
  throw ArgumentError("unknown environment kind");
}

namespace {

// Componentwise mean and SE of a set of gradient vectors.
void MeanAndSe(std::span<const GradVector> xs, GradVector& mean, GradVector& se) {
  const std::size_t d = xs.front().size();
  mean = GradVector(d);
  se = GradVector(d);
  Vec column(xs.size());
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < xs.size(); ++i) column[i] = xs[i][c];
    const MeanSe ms = MeanWithSe(column);
    mean[c] = ms.mean;
    se[c] = ms.se;
  }
}

GradVector StartStateReinforce(const Trajectory& traj, const GaussianPolicy& policy,
                               const Baseline& baseline) {
  const Vec& s = traj.states[0];
  GradVector score = policy.Score(s, traj.raw_actions[0]);
  const double coef = traj.returns[0] - baseline(s);
  for (std::size_t i = 0; i < score.size(); ++i) score[i] *= coef;
  return score;
}

double Norm(const GradVector& g) { return std::sqrt(SquaredNorm(g)); }

}  // namespace

ReferenceResult ReferenceGradient(const EnvSpec& spec, const GaussianPolicy& policy,
                                  const Baseline& baseline, std::size_t n_rollouts,
                                  const Rng& rng, ReferenceMode mode) {
  if (n_rollouts < 1) throw ArgumentError("reference gradient needs at least one rollout");
  std::vector<GradVector> estimates;
  estimates.reserve(n_rollouts);
  for (std::size_t i = 0; i < n_rollouts; ++i) {
    Rng cell = rng.Split(i);
    const Trajectory traj = Rollout(spec, policy, cell);
    estimates.push_back(mode == ReferenceMode::kTrajectory
                            ? ReinforceEstimate(traj, policy, baseline).grad
                            : StartStateReinforce(traj, policy, baseline));
  }
  ReferenceResult out;
  out.n_rollouts = n_rollouts;
  MeanAndSe(estimates, out.mean, out.se);
  return out;
}

GradVector OracleGradient(const EnvSpec& spec, const GaussianPolicy& policy) {
  switch (spec.kind) {
    case EnvKind::kBandit:
      return BanditOracleGradient(spec, policy);
    case EnvKind::kLqr: {
      const LqrValueModel model(spec, policy);
      return LqrOracleGradientAt(model, policy, StartState(spec));
    }
    case EnvKind::kPendulum:
      break;
  }
  throw UnsupportedError("no oracle gradient for environment '" + ToString(spec.kind) + "'");
}

std::vector<MseSweepRow> MseSweep(const EnvSpec& spec, const GaussianPolicy& policy,
                                  const AdvantageFunction& adv, std::span<const std::size_t> ns_list,
                                  std::size_t n_estimates, const GradVector& reference,
                                  const Rng& rng, const MseSweepOptions& options) {
  if (n_estimates < 2) throw ArgumentError("MSE sweep needs at least two estimates per N_S");
  if (ns_list.empty()) throw ArgumentError("MSE sweep needs at least one N_S");
  if (reference.size() != policy.param_dim()) {
    throw ShapeError("reference gradient dimension does not match the policy");
  }
  Vec start;
  if (options.mode == ReferenceMode::kStartState) start = StartState(spec);
  const double ref_norm = Norm(reference);

  std::vector<MseSweepRow> rows;
  for (std::size_t n_s : ns_list) {
    if (n_s < 1) throw ArgumentError("N_S must be >= 1");
    const AllActionConfig config{options.kind, n_s};
    const Rng ns_rng = rng.Split(n_s);
    Vec sq(n_estimates);
    for (std::size_t i = 0; i < n_estimates; ++i) {
      Rng cell = ns_rng.Split(i);
      GradVector g;
      if (options.mode == ReferenceMode::kStartState) {
        g = StateEstimate(policy, adv, start, config, cell).grad;
      } else {
        const Trajectory traj = Rollout(spec, policy, cell);
        g = TrajectoryEstimate(policy, adv, traj, config, cell).grad;
      }
      sq[i] = SquaredDistance(g, reference);
    }
    const MeanSe ms = MeanWithSe(sq);
    rows.push_back({n_s, ms.mean, n_estimates, ms.se, ref_norm});
  }
  return rows;
}

InverseNFit FitInverseN(std::span<const MseSweepRow> rows) {
  if (rows.size() < 3) throw ArgumentError("1/N_S fit needs at least three rows");
  Vec x(rows.size());
  Vec y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].n_s < 1) throw ArgumentError("N_S must be >= 1");
    x[i] = 1.0 / static_cast<double>(rows[i].n_s);
    y[i] = rows[i].mse;
  }
  const LineFit fit = FitLine(x, y);
  return {fit.intercept, fit.slope, fit.r_squared};
}

Theorem1Report Theorem1Check(const EnvSpec& spec, const GaussianPolicy& policy,
                             const AdvantageFunction& critic, const Baseline& baseline,
                             const AdvantageFunction& oracle, const Theorem1Options& options,
                             const Rng& rng) {
  if (spec.kind == EnvKind::kPendulum) {
    throw UnsupportedError("theorem 1 check needs an environment with an advantage oracle");
  }
  if (options.ns_list.empty()) throw ArgumentError("theorem 1 check needs at least one N_S");
  const Vec s0 = StartState(spec);
  const std::size_t d = policy.param_dim();

  const ReferenceResult ref = ReferenceGradient(spec, policy, baseline, options.n_reference,
                                                rng.Split(Stream::kReference),
                                                ReferenceMode::kStartState);
  const double ref_var = SquaredNorm(ref.se);

  const std::vector<Vec> states{s0};
  const double m = ScoreNormBound(policy, states, options.score_grid).m;

  // L and the advantage MSE from the same action draws at s0.
  Rng term_rng = rng.Split(Stream::kOracle);
  const MeanJacobian jac = policy.Jacobian(s0);
  Vec l_terms(options.n_term_samples);
  std::vector<StateAction> sample;
  sample.reserve(options.n_term_samples);
  for (std::size_t i = 0; i < options.n_term_samples; ++i) {
    Vec a = policy.SampleRawAround(jac.mean, term_rng);
    GradVector z(d);
    jac.AccumulateScore(a, policy.sigma(), oracle.Advantage(s0, a), z);
    l_terms[i] = SquaredDistance(z, ref.mean);
    sample.emplace_back(s0, std::move(a));
  }
  const MeanSe l = MeanWithSe(l_terms);
  const MeanSe l_adv = AdvantageMse(critic, oracle, sample);

  MseSweepOptions sweep_options;
  sweep_options.mode = ReferenceMode::kStartState;
  const std::vector<MseSweepRow> rows =
      MseSweep(spec, policy, critic, options.ns_list, options.n_estimates, ref.mean,
               rng.Split(Stream::kSweep), sweep_options);

  Theorem1Report report;
  report.reference = ref.mean;
  report.satisfied = true;
  Vec log_n;
  Vec log_lhs;
  for (const MseSweepRow& row : rows) {
    const double n = static_cast<double>(row.n_s);
    const double dd = static_cast<double>(d);
    TheoremCheck check;
    check.terms = {m, l_adv.mean, l.mean, 0.0, d, row.n_s};
    check.lhs = row.mse;
    check.rhs = m * l_adv.mean + (l.mean + m * l_adv.mean * dd) / n;
    const double rhs_se = std::hypot(m * (1.0 + dd / n) * l_adv.se, l.se / n);
    check.se = std::sqrt(row.se * row.se + rhs_se * rhs_se + ref_var * ref_var);
    check.satisfied = check.lhs <= check.rhs + 3.0 * check.se;
    report.satisfied = report.satisfied && check.satisfied;
    report.checks.push_back(check);
    if (row.mse > 0.0) {
      log_n.push_back(std::log(n));
      log_lhs.push_back(std::log(row.mse));
    }
  }
  if (log_n.size() >= 2) {
    report.slope = FitLine(log_n, log_lhs).slope;
  } else {
    report.slope = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

Theorem2Report Theorem2Check(const EnvSpec& spec, const GaussianPolicy& policy,
                             const Baseline& baseline, const AdvantageFunction& oracle,
                             const GradVector& oracle_gradient, std::size_t n_rollouts,
                             const Rng& rng, std::size_t score_grid) {
  if (spec.kind == EnvKind::kPendulum) {
    throw UnsupportedError("theorem 2 check needs an environment with an advantage oracle");
  }
  if (n_rollouts < 2) throw ArgumentError("theorem 2 check needs at least two rollouts");
  if (oracle_gradient.size() != policy.param_dim()) {
    throw ShapeError("oracle gradient dimension does not match the policy");
  }
  const Vec s0 = StartState(spec);
  const std::vector<Vec> states{s0};
  const double m = ScoreNormBound(policy, states, score_grid).m;

  Vec lr_terms(n_rollouts);
  Vec l_terms(n_rollouts);
  Vec xi_terms(n_rollouts);
  Vec diff(n_rollouts);
  for (std::size_t i = 0; i < n_rollouts; ++i) {
    Rng cell = rng.Split(i);
    const Trajectory traj = Rollout(spec, policy, cell);
    const Vec& a0 = traj.raw_actions[0];
    const GradVector score = policy.Score(s0, a0);
    const double adv = oracle.Advantage(s0, a0);
    const double coef = traj.returns[0] - baseline(s0);
    GradVector r(score.size());
    GradVector o(score.size());
    Axpy(coef, score, r);
    Axpy(adv, score, o);
    lr_terms[i] = SquaredDistance(r, oracle_gradient);
    l_terms[i] = SquaredDistance(o, oracle_gradient);
    xi_terms[i] = (coef - adv) * (coef - adv);
    diff[i] = lr_terms[i] - l_terms[i] - m * xi_terms[i];
  }
  const MeanSe lr = MeanWithSe(lr_terms);
  const MeanSe l = MeanWithSe(l_terms);
  const MeanSe xi = MeanWithSe(xi_terms);
  const MeanSe gap = MeanWithSe(diff);

  Theorem2Report report;
  report.l_r = lr.mean;
  report.l_r_se = lr.se;
  report.xi_se = xi.se;
  TheoremCheck& check = report.check;
  check.terms = {m, 0.0, l.mean, xi.mean, policy.param_dim(), 1};
  check.lhs = lr.mean;
  check.rhs = l.mean + m * xi.mean;
  check.se = gap.se;
  check.satisfied = gap.mean <= 3.0 * gap.se;
  return report;
}

QuadraticObjective::QuadraticObjective(Eigen::MatrixXd h_in, Eigen::VectorXd b_in)
    : h(std::move(h_in)), b(std::move(b_in)) {
  if (h.rows() != h.cols() || h.rows() != b.size() || h.rows() == 0) {
    throw ShapeError("quadratic objective needs a square H matching b");
  }
  if (!h.isApprox(h.transpose(), 1e-12)) throw ArgumentError("H must be symmetric");
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
  const Eigen::VectorXd& values = eig.eigenvalues();
  mu_ = values.cwiseAbs().maxCoeff();
  if (values.maxCoeff() > 1e-12 * std::max(1.0, mu_)) {
    throw ArgumentError("H has a positive eigenvalue; the objective is not concave");
  }
}

double QuadraticObjective::Value(const Eigen::VectorXd& theta) const {
  return 0.5 * theta.dot(h * theta) + b.dot(theta);
}

Eigen::VectorXd QuadraticObjective::Gradient(const Eigen::VectorXd& theta) const {
  return h * theta + b;
}

double Theorem3DisplayedBound(double j, const Eigen::VectorXd& grad, const Eigen::VectorXd& bias,
                              double trace_var, double mu) {
  return j + 0.5 * grad.squaredNorm() + ((grad - 0.5 * bias).dot(bias) - trace_var) / mu;
}

double Theorem3SmoothnessBound(double j, const Eigen::VectorXd& grad, const Eigen::VectorXd& bias,
                               double trace_var, double mu, double delta) {
  const Eigen::VectorXd mean_step = grad + bias;
  return j + delta * grad.dot(mean_step) -
         0.5 * mu * delta * delta * (mean_step.squaredNorm() + trace_var);
}

Theorem3Report Theorem3Check(const QuadraticObjective& objective, const BiasFn& bias_fn,
                             const Eigen::MatrixXd& noise_cov, double delta,
                             std::span<const Eigen::VectorXd> thetas, std::size_t n_trials,
                             const Rng& rng) {
  const Eigen::Index dim = objective.b.size();
  const double mu = objective.Smoothness();
  if (!(delta > 0.0)) throw PreconditionError("step size must be positive");
  if (mu > 0.0 && delta > (1.0 + 1e-12) / mu) {
    throw PreconditionError("step size exceeds 1/mu");
  }
  if (noise_cov.rows() != dim || noise_cov.cols() != dim) {
    throw ShapeError("noise covariance does not match the objective dimension");
  }
  if (thetas.empty()) throw ArgumentError("theorem 3 check needs at least one point");
  if (n_trials < 2) throw ArgumentError("theorem 3 check needs at least two trials");

  // Symmetric square root handles singular (including zero) covariances.
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(noise_cov);
  if (eig.eigenvalues().minCoeff() < -1e-12) {
    throw ArgumentError("noise covariance must be positive semidefinite");
  }
  const Eigen::MatrixXd root = eig.eigenvectors() *
                               eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                               eig.eigenvectors().transpose();
  const double trace_var = noise_cov.trace();

  Theorem3Report report;
  report.mu = mu;
  report.delta = delta;
  report.noise_trace = trace_var;
  report.bound_satisfied = true;
  report.closed_form_match = true;
  for (std::size_t p = 0; p < thetas.size(); ++p) {
    const Eigen::VectorXd& theta = thetas[p];
    const Eigen::VectorXd grad = objective.Gradient(theta);
    const Eigen::VectorXd bias = bias_fn(theta);
    if (bias.size() != dim) throw ShapeError("bias vector has the wrong dimension");
    report.bias_norm = std::max(report.bias_norm, bias.norm());

    Rng point_rng = rng.Split(p);
    Vec values(n_trials);
    Eigen::VectorXd z(dim);
    for (std::size_t t = 0; t < n_trials; ++t) {
      for (Eigen::Index i = 0; i < dim; ++i) z[i] = point_rng.Normal();
      const Eigen::VectorXd g_hat = grad + bias + root * z;
      values[t] = objective.Value(theta + delta * g_hat);
    }
    const MeanSe ms = MeanWithSe(values);

    Theorem3Point point;
    point.theta = theta;
    point.j = objective.Value(theta);
    point.empirical_mean = ms.mean;
    point.empirical_se = ms.se;
    point.closed_form = objective.Value(theta + delta * (grad + bias)) +
                        0.5 * delta * delta * (objective.h * noise_cov).trace();
    point.bound = Theorem3DisplayedBound(point.j, grad, bias, trace_var, mu);
    point.smoothness_bound = Theorem3SmoothnessBound(point.j, grad, bias, trace_var, mu, delta);
    point.margin = point.empirical_mean - point.bound;
    // Rounding slack for the noiseless cells where the SE is exactly zero.
    const double eps = 1e-10 * (1.0 + std::abs(point.closed_form));
    point.bound_satisfied = point.margin >= -3.0 * ms.se - eps;
    point.closed_form_match = std::abs(point.empirical_mean - point.closed_form) <= 3.0 * ms.se + eps;
    report.bound_satisfied = report.bound_satisfied && point.bound_satisfied;
    report.closed_form_match = report.closed_form_match && point.closed_form_match;
    report.points.push_back(std::move(point));
  }
  return report;
}

Theorem3Problem MakeTheorem3Problem(const Rng& rng, std::size_t n_points) {
  const int kDim = 5;
  Rng local = rng.Split(Stream::kTheorem);
  Eigen::MatrixXd raw(kDim, kDim);
  for (int i = 0; i < kDim; ++i) {
    for (int j = 0; j < kDim; ++j) raw(i, j) = local.Normal();
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd spectrum(kDim);
  spectrum << -1.0, -0.75, -0.5, -0.25, -0.1;
  Eigen::MatrixXd h = q * spectrum.asDiagonal() * q.transpose();
  h = 0.5 * (h + h.transpose());
  Eigen::VectorXd optimum(kDim);
  optimum << 1.0, -1.0, 0.5, 0.0, 2.0;
  Eigen::VectorXd b = -h * optimum;

  auto unit = [&local, kDim]() {
    Eigen::VectorXd u(kDim);
    for (int i = 0; i < kDim; ++i) u[i] = local.Normal();
    return Eigen::VectorXd(u.normalized());
  };
  Theorem3Problem problem{QuadraticObjective(std::move(h), std::move(b)), {}, {}};
  for (std::size_t p = 0; p < n_points; ++p) problem.thetas.push_back(optimum + unit());
  problem.bias_direction = unit();
  return problem;
}

std::vector<Theorem3Cell> Theorem3Grid(const Theorem3Problem& problem,
                                       std::span<const double> bias_magnitudes,
                                       std::span<const double> noise_scales,
                                       std::size_t n_trials, const Rng& rng) {
  const double mu = problem.objective.Smoothness();
  const double delta = 1.0 / mu;
  const Eigen::Index dim = problem.objective.b.size();
  std::vector<Theorem3Cell> cells;
  std::size_t index = 0;
  for (double m : bias_magnitudes) {
    for (double s : noise_scales) {
      const Eigen::VectorXd bias = m * problem.bias_direction;
      const BiasFn bias_fn = [bias](const Eigen::VectorXd&) { return bias; };
      const Eigen::MatrixXd cov = s * s * Eigen::MatrixXd::Identity(dim, dim);
      cells.push_back({m, s,
                       Theorem3Check(problem.objective, bias_fn, cov, delta, problem.thetas,
                                     n_trials, rng.Split(index++))});
    }
  }
  return cells;
}

}  // namespace allact
