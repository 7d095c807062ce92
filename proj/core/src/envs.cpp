#include "allact/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "allact/errors.hpp"

namespace allact {

std::string ToString(EnvKind kind) {
  switch (kind) {
    case EnvKind::kBandit:
      return "bandit";
    case EnvKind::kLqr:
      return "lqr";
    case EnvKind::kPendulum:
      return "pendulum";
  }
  return "unknown";
}

EnvKind EnvKindFromString(const std::string& name) {
  if (name == "bandit") return EnvKind::kBandit;
  if (name == "lqr") return EnvKind::kLqr;
  if (name == "pendulum") return EnvKind::kPendulum;
  throw ArgumentError("unknown environment kind '" + name + "'");
}

void EnvSpec::Validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ArgumentError("gamma must lie in [0, 1)");
  if (horizon < 1) throw ArgumentError("horizon must be at least 1");
  if (box.dim() != action_dim) throw ShapeError("action box does not match action_dim");
  for (std::size_t i = 0; i < box.dim(); ++i) {
    if (!std::isfinite(box.low[i]) || !std::isfinite(box.high[i])) {
      throw ArgumentError("action box must be bounded");
    }
  }
  switch (kind) {
    case EnvKind::kBandit:
      if (!std::holds_alternative<BanditParams>(params)) {
        throw ArgumentError("bandit spec without bandit parameters");
      }
      if (action_dim != 1) throw ArgumentError("bandit has a one-dimensional action");
      if (horizon != 1) throw ArgumentError("bandit horizon must be 1");
      if (bandit().noise_std < 0.0) throw ArgumentError("bandit noise_std must be >= 0");
      break;
    case EnvKind::kLqr: {
      if (!std::holds_alternative<LqrParams>(params)) {
        throw ArgumentError("lqr spec without lqr parameters");
      }
      const LqrParams& p = lqr();
      const auto n = static_cast<Eigen::Index>(state_dim);
      const auto m = static_cast<Eigen::Index>(action_dim);
      if (p.a.rows() != n || p.a.cols() != n) throw ShapeError("lqr A must be n x n");
      if (p.b.rows() != n || p.b.cols() != m) throw ShapeError("lqr B must be n x m");
      if (p.state_cost.rows() != n || p.state_cost.cols() != n) {
        throw ShapeError("lqr state cost must be n x n");
      }
      if (p.action_cost.rows() != m || p.action_cost.cols() != m) {
        throw ShapeError("lqr action cost must be m x m");
      }
      if (p.init_low.size() != state_dim || p.init_high.size() != state_dim) {
        throw ShapeError("lqr init bounds must have state_dim entries");
      }
      for (std::size_t i = 0; i < state_dim; ++i) {
        if (p.init_low[i] > p.init_high[i]) throw ArgumentError("lqr init bounds reversed");
      }
      break;
    }
    case EnvKind::kPendulum: {
      if (!std::holds_alternative<PendulumParams>(params)) {
        throw ArgumentError("pendulum spec without pendulum parameters");
      }
      const PendulumParams& p = pendulum();
      if (state_dim != 2 || action_dim != 1) {
        throw ArgumentError("pendulum has a 2-d state and 1-d action");
      }
      if (!(p.mass > 0.0 && p.length > 0.0 && p.dt > 0.0)) {
        throw ArgumentError("pendulum mass, length and dt must be positive");
      }
      if (!(p.fall_angle > p.init_angle)) {
        throw ArgumentError("pendulum fall_angle must exceed init_angle");
      }
      break;
    }
  }
}

double Trajectory::Score() const {
  double s = 0.0;
  for (double r : rewards) s += r;
  return s;
}

EnvSpec DefaultBanditSpec() {
  EnvSpec spec;
  spec.kind = EnvKind::kBandit;
  spec.state_dim = 1;
  spec.action_dim = 1;
  spec.box = ActionBox({-6.0}, {6.0});
  spec.gamma = 0.99;
  spec.horizon = 1;
  spec.params = BanditParams{};
  return spec;
}

EnvSpec DefaultLqrSpec() {
  EnvSpec spec;
  spec.kind = EnvKind::kLqr;
  spec.state_dim = 2;
  spec.action_dim = 1;
  spec.box = ActionBox({-10.0}, {10.0});
  spec.gamma = 0.9;
  spec.horizon = 200;
  LqrParams p;
  p.a = Eigen::MatrixXd(2, 2);
  p.a << 1.0, 0.1, 0.0, 1.0;
  p.b = Eigen::MatrixXd(2, 1);
  p.b << 0.005, 0.1;
  p.state_cost = Eigen::MatrixXd(2, 2);
  p.state_cost << 1.0, 0.0, 0.0, 0.1;
  p.action_cost = Eigen::MatrixXd(1, 1);
  p.action_cost << 0.1;
  p.init_low = {1.0, 0.0};
  p.init_high = {1.0, 0.0};
  spec.params = std::move(p);
  return spec;
}

EnvSpec DefaultPendulumSpec() {
  EnvSpec spec;
  spec.kind = EnvKind::kPendulum;
  spec.state_dim = 2;
  spec.action_dim = 1;
  spec.box = ActionBox({-2.0}, {2.0});
  spec.gamma = 0.9;
  spec.horizon = 200;
  spec.params = PendulumParams{};
  return spec;
}

EnvSpec DefaultSpec(EnvKind kind) {
  switch (kind) {
    case EnvKind::kBandit:
      return DefaultBanditSpec();
    case EnvKind::kLqr:
      return DefaultLqrSpec();
    case EnvKind::kPendulum:
      return DefaultPendulumSpec();
  }
  throw ArgumentError("unknown environment kind");
}

Vec EnvReset(const EnvSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case EnvKind::kBandit:
      return Vec(spec.state_dim, 0.0);
    case EnvKind::kLqr: {
      const LqrParams& p = spec.lqr();
      Vec s(spec.state_dim);
      for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = p.init_low[i] == p.init_high[i] ? p.init_low[i]
                                               : rng.Uniform(p.init_low[i], p.init_high[i]);
      }
      return s;
    }
    case EnvKind::kPendulum: {
      const PendulumParams& p = spec.pendulum();
      const double angle = p.init_angle > 0.0 ? rng.Uniform(-p.init_angle, p.init_angle) : 0.0;
      const double vel =
          p.init_velocity > 0.0 ? rng.Uniform(-p.init_velocity, p.init_velocity) : 0.0;
      return {angle, vel};
    }
  }
  throw ArgumentError("unknown environment kind");
}

double BanditExpectedReward(const EnvSpec& spec, std::span<const double> a) {
  const BanditParams& p = spec.bandit();
  const double x = std::clamp(a[0], spec.box.low[0], spec.box.high[0]);
  const double d = x - p.target;
  return -p.reward_scale * d * d;
}

StepResult EnvStep(const EnvSpec& spec, std::span<const double> state,
                   std::span<const double> action, Rng& rng) {
  if (!AllFinite(state)) throw NumericError("environment state is not finite");
  if (!AllFinite(action)) throw NumericError("environment action is not finite");
  StepResult out;
  switch (spec.kind) {
    case EnvKind::kBandit: {
      const BanditParams& p = spec.bandit();
      const double noise = p.noise_std > 0.0 ? p.noise_std * rng.Normal() : 0.0;
      out.reward = BanditExpectedReward(spec, action) + p.reward_scale * noise;
      out.next_state.assign(state.begin(), state.end());
      out.done = true;
      break;
    }
    case EnvKind::kLqr: {
      const LqrParams& p = spec.lqr();
      const Eigen::Map<const Eigen::VectorXd> x(state.data(), static_cast<Eigen::Index>(state.size()));
      const Eigen::Map<const Eigen::VectorXd> u(action.data(),
                                                static_cast<Eigen::Index>(action.size()));
      out.reward = -(x.dot(p.state_cost * x) + u.dot(p.action_cost * u));
      const Eigen::VectorXd next = p.a * x + p.b * u;
      out.next_state.assign(next.data(), next.data() + next.size());
      out.done = false;
      break;
    }
    case EnvKind::kPendulum: {
      const PendulumParams& p = spec.pendulum();
      const double angle = state[0];
      const double vel = state[1];
      const double torque = action[0];
      const double inertia = p.mass * p.length * p.length;
      const double acc = (p.gravity / p.length) * std::sin(angle) + torque / inertia -
                         p.damping * vel / inertia;
      const double next_vel = vel + p.dt * acc;
      const double next_angle = angle + p.dt * next_vel;
      out.reward = p.alive_bonus - (p.angle_weight * angle * angle +
                                    p.velocity_weight * vel * vel +
                                    p.torque_weight * torque * torque);
      out.next_state = {next_angle, next_vel};
      out.done = std::abs(next_angle) > p.fall_angle;
      break;
    }
  }
  if (!AllFinite(out.next_state) || !std::isfinite(out.reward)) {
    throw NumericError("environment produced a non-finite state or reward");
  }
  return out;
}

Vec DiscountedReturns(std::span<const double> rewards, double gamma) {
  Vec g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

Trajectory Rollout(const EnvSpec& spec, const GaussianPolicy& policy, Rng& rng) {
  Trajectory traj;
  Vec s = EnvReset(spec, rng);
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    Vec raw = policy.SampleRaw(s, rng);
    Vec a = spec.box.Clip(raw);
    StepResult step = EnvStep(spec, s, a, rng);
    traj.states.push_back(s);
    traj.actions.push_back(std::move(a));
    traj.raw_actions.push_back(std::move(raw));
    traj.rewards.push_back(step.reward);
    traj.next_states.push_back(step.next_state);
    traj.dones.push_back(step.done);
    if (step.done) break;
    s = std::move(step.next_state);
  }
  traj.returns = DiscountedReturns(traj.rewards, spec.gamma);
  return traj;
}

// ---------------------------------------------------------------------------
// LQR policy evaluation

namespace {

struct LinearGain {
  Eigen::MatrixXd k;  // m x n
  Eigen::VectorXd b;  // m
};

LinearGain ExtractGain(const GaussianPolicy& policy) {
  if (!policy.IsLinear()) {
    throw UnsupportedError("LQR oracle requires a policy whose mean is linear in the state");
  }
  const auto layers = Unflatten(policy.params(), policy.mean_net().arch());
  const auto m = static_cast<Eigen::Index>(policy.action_dim());
  const auto n = static_cast<Eigen::Index>(policy.state_dim());
  LinearGain g{Eigen::MatrixXd(m, n), Eigen::VectorXd(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) g.k(i, j) = layers[0].weights[static_cast<std::size_t>(i * n + j)];
    g.b(i) = layers[0].bias[static_cast<std::size_t>(i)];
  }
  return g;
}

}  // namespace

LqrValueModel::LqrValueModel(const EnvSpec& spec, const GaussianPolicy& policy, double tol,
                             std::size_t max_iters)
    : n_(spec.state_dim), m_(spec.action_dim) {
  if (spec.kind != EnvKind::kLqr) throw UnsupportedError("LQR oracle needs an lqr environment");
  const LqrParams& p = spec.lqr();
  const LinearGain gain = ExtractGain(policy);
  const auto n = static_cast<Eigen::Index>(n_);
  const auto m = static_cast<Eigen::Index>(m_);

  const Eigen::MatrixXd closed = p.a + p.b * gain.k;
  const double radius = closed.eigenvalues().cwiseAbs().maxCoeff();
  if (spec.gamma > 0.0 && radius >= 1.0 / std::sqrt(spec.gamma)) {
    throw DivergenceError("closed-loop spectral radius " + std::to_string(radius) +
                          " >= 1/sqrt(gamma); policy evaluation diverges");
  }

  // y = [s; a; 1] -> [s'; 1]
  Eigen::MatrixXd next = Eigen::MatrixXd::Zero(n + 1, n + m + 1);
  next.block(0, 0, n, n) = p.a;
  next.block(0, n, n, m) = p.b;
  next(n, n + m) = 1.0;

  // [s; 1] -> E-part of [s; a; 1] under a = K s + b + eps
  Eigen::MatrixXd lift = Eigen::MatrixXd::Zero(n + m + 1, n + 1);
  lift.block(0, 0, n, n).setIdentity();
  lift.block(n, 0, m, n) = gain.k;
  lift.block(n, n, m, 1) = gain.b;
  lift(n + m, n) = 1.0;

  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n + m + 1, n + m + 1);
  cost.block(0, 0, n, n) = p.state_cost;
  cost.block(n, n, m, m) = p.action_cost;

  Eigen::VectorXd var(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const double s = policy.sigma()[static_cast<std::size_t>(i)];
    var(i) = s * s;
  }

  auto value_of = [&](const Eigen::MatrixXd& g) {
    Eigen::MatrixXd v = lift.transpose() * g * lift;
    v(n, n) += (g.block(n, n, m, m).diagonal().array() * var.array()).sum();
    return v;
  };

  g_ = cost;
  for (iterations_ = 1; iterations_ <= max_iters; ++iterations_) {
    const Eigen::MatrixXd v = value_of(g_);
    Eigen::MatrixXd updated = cost + spec.gamma * next.transpose() * v * next;
    const double change = (updated - g_).cwiseAbs().maxCoeff();
    g_ = std::move(updated);
    if (!g_.allFinite()) throw DivergenceError("LQR policy evaluation produced non-finite values");
    if (change <= tol) break;
  }
  if (iterations_ > max_iters) {
    throw DivergenceError("LQR policy evaluation did not reach tolerance");
  }
  p_ = value_of(g_);
}

double LqrValueModel::Q(std::span<const double> s, std::span<const double> a) const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(n_ + m_ + 1));
  for (std::size_t i = 0; i < n_; ++i) y(static_cast<Eigen::Index>(i)) = s[i];
  for (std::size_t i = 0; i < m_; ++i) y(static_cast<Eigen::Index>(n_ + i)) = a[i];
  y(static_cast<Eigen::Index>(n_ + m_)) = 1.0;
  return -y.dot(g_ * y);
}

double LqrValueModel::V(std::span<const double> s) const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(n_ + 1));
  for (std::size_t i = 0; i < n_; ++i) y(static_cast<Eigen::Index>(i)) = s[i];
  y(static_cast<Eigen::Index>(n_)) = 1.0;
  return -y.dot(p_ * y);
}

double LqrValueModel::Advantage(std::span<const double> s, std::span<const double> a) const {
  return Q(s, a) - V(s);
}

Vec LqrValueModel::ActionGradient(std::span<const double> s, std::span<const double> a) const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(n_ + m_ + 1));
  for (std::size_t i = 0; i < n_; ++i) y(static_cast<Eigen::Index>(i)) = s[i];
  for (std::size_t i = 0; i < m_; ++i) y(static_cast<Eigen::Index>(n_ + i)) = a[i];
  y(static_cast<Eigen::Index>(n_ + m_)) = 1.0;
  // Q = -y'Gy with G symmetric => dQ/dy = -2 G y
  const Eigen::VectorXd grad = -2.0 * (g_ * y);
  Vec out(m_);
  for (std::size_t i = 0; i < m_; ++i) out[i] = grad(static_cast<Eigen::Index>(n_ + i));
  return out;
}

double LqrOracleQ(const EnvSpec& spec, const GaussianPolicy& policy, std::span<const double> s,
                  std::span<const double> a) {
  return LqrValueModel(spec, policy).Q(s, a);
}

GradVector BanditOracleGradient(const EnvSpec& spec, const GaussianPolicy& policy,
                                std::size_t points) {
  if (spec.kind != EnvKind::kBandit) throw UnsupportedError("bandit oracle needs a bandit");
  if (points < 3) throw ArgumentError("bandit oracle needs at least three points");
  const Vec s(spec.state_dim, 0.0);
  const MeanJacobian jac = policy.Jacobian(s);
  const double mu = jac.mean[0];
  const double sigma = policy.sigma()[0];
  const double lo = mu - 8.0 * sigma;
  const double hi = mu + 8.0 * sigma;
  const double h = (hi - lo) / static_cast<double>(points - 1);

  // Scalar part of the integrand: pi(a) * (a - mu) / sigma^2 * Q(a).
  double acc = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double a = lo + h * static_cast<double>(i);
    const double z = (a - mu) / sigma;
    const double density = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    const double w = (i == 0 || i + 1 == points) ? 0.5 : 1.0;
    const double av[1] = {a};
    acc += w * density * (a - mu) / (sigma * sigma) * BanditExpectedReward(spec, av);
  }
  acc *= h;
  GradVector g(policy.param_dim());
  Axpy(acc, jac.rows[0], g);
  return g;
}

GradVector LqrOracleGradientAt(const LqrValueModel& model, const GaussianPolicy& policy,
                               std::span<const double> s) {
  const MeanJacobian jac = policy.Jacobian(s);
  const Vec dq = model.ActionGradient(s, jac.mean);
  GradVector g(policy.param_dim());
  for (std::size_t i = 0; i < dq.size(); ++i) Axpy(dq[i], jac.rows[i], g);
  return g;
}

}  // namespace allact
