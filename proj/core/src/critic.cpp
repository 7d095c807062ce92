#include "allact/critic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "allact/errors.hpp"

namespace allact {

void AdvantageFunction::AdvantageBatch(std::span<const double> s, std::span<const Vec> actions,
                                       std::span<double> out) const {
  for (std::size_t i = 0; i < actions.size(); ++i) out[i] = Advantage(s, actions[i]);
}

CriticPair::CriticPair(Network q_net, Network v_net, ActionBox box, const CriticConfig& config)
    : q_net_(std::move(q_net)), v_net_(std::move(v_net)), box_(std::move(box)), config_(config) {
  if (config_.expectation_samples < 1) throw ArgumentError("expected SARSA needs K >= 1");
  if (v_net_.arch().output_width() != 1 || q_net_.arch().output_width() != 1) {
    throw ShapeError("critic networks must have a scalar output");
  }
  if (q_net_.arch().input_width() != v_net_.arch().input_width() + box_.dim()) {
    throw ShapeError("q_net input width must equal state_dim + action_dim", 0);
  }
}

CriticPair CriticPair::Create(std::size_t state_dim, const ActionBox& box,
                              const CriticConfig& config, Rng& rng) {
  Architecture q_arch = Architecture::Mlp(state_dim + box.dim(), config.hidden, 1);
  Architecture v_arch = Architecture::Mlp(state_dim, config.hidden, 1);
  ParamVector q_params = InitParams(q_arch, rng);
  ParamVector v_params = InitParams(v_arch, rng);
  return CriticPair(Network(std::move(q_arch), std::move(q_params)),
                    Network(std::move(v_arch), std::move(v_params)), box, config);
}

namespace {

Vec Concat(std::span<const double> s, std::span<const double> a) {
  Vec x;
  x.reserve(s.size() + a.size());
  x.insert(x.end(), s.begin(), s.end());
  x.insert(x.end(), a.begin(), a.end());
  return x;
}

Vec ClippedInput(std::span<const double> s, std::span<const double> a, const ActionBox& box) {
  Vec x = Concat(s, a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    x[s.size() + i] = std::clamp(x[s.size() + i], box.low[i], box.high[i]);
  }
  return x;
}

}  // namespace

double CriticPair::QValue(std::span<const double> s, std::span<const double> a) const {
  return q_net_.Scalar(ClippedInput(s, a, box_));
}

double CriticPair::Advantage(std::span<const double> s, std::span<const double> a) const {
  return QValue(s, a) - Value(s);
}

void CriticPair::AdvantageBatch(std::span<const double> s, std::span<const Vec> actions,
                                std::span<double> out) const {
  const double v = Value(s);
  Vec x = Concat(s, actions.empty() ? std::span<const double>() : std::span<const double>(actions[0]));
  for (std::size_t k = 0; k < actions.size(); ++k) {
    for (std::size_t i = 0; i < actions[k].size(); ++i) {
      x[s.size() + i] = std::clamp(actions[k][i], box_.low[i], box_.high[i]);
    }
    out[k] = q_net_.Scalar(x) - v;
  }
}

FitVResult FitV(Network v_net, std::span<const Trajectory> trajectories, std::size_t epochs,
                double lr, std::size_t batch_size, Rng& rng) {
  if (trajectories.empty()) throw ArgumentError("fit_v needs at least one trajectory");
  if (batch_size < 1) throw ArgumentError("fit_v batch size must be >= 1");
  std::vector<std::pair<const Vec*, double>> pairs;
  for (const Trajectory& traj : trajectories) {
    for (std::size_t t = 0; t < traj.size(); ++t) pairs.emplace_back(&traj.states[t], traj.returns[t]);
  }
  if (pairs.empty()) throw ArgumentError("fit_v needs at least one visited state");

  FitVResult result{std::move(v_net), {}};
  Network& net = result.net;
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      const double scale = lr / static_cast<double>(stop - start);
      GradVector step(net.params().size());
      for (std::size_t j = start; j < stop; ++j) {
        const auto& [state, target] = pairs[order[j]];
        const double residual = net.Scalar(*state) - target;
        epoch_loss += 0.5 * residual * residual;
        Axpy(residual, net.ScalarGradient(*state), step);
      }
      GradVector& g = step;
      for (std::size_t i = 0; i < g.size(); ++i) net.mutable_params()[i] -= scale * g[i];
    }
    epoch_loss /= static_cast<double>(pairs.size());
    if (!std::isfinite(epoch_loss) || !AllFinite(net.params().span())) {
      throw NumericError("value regression diverged (non-finite loss); lower lr_v");
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  return result;
}

double ExpectedSarsaTarget(const Network& q_net, const Transition& tr,
                           const GaussianPolicy& policy, std::size_t k, double gamma,
                           const ActionBox& box, Rng& rng) {
  if (k < 1) throw ArgumentError("expected SARSA needs K >= 1");
  if (tr.done || gamma == 0.0) return tr.reward;
  const Vec mean = policy.Mean(tr.next_state);
  Vec x = Concat(tr.next_state, mean);
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    const Vec a = policy.SampleRawAround(mean, rng);
    for (std::size_t i = 0; i < a.size(); ++i) {
      x[tr.next_state.size() + i] = std::clamp(a[i], box.low[i], box.high[i]);
    }
    acc += q_net.Scalar(x);
  }
  const double y = tr.reward + gamma * acc / static_cast<double>(k);
  if (!std::isfinite(y)) throw NumericError("expected SARSA target is not finite");
  return y;
}

double ExpectedSarsaUpdate(Network& q_net, const Transition& tr, const GaussianPolicy& policy,
                           std::size_t k, double gamma, double lr, const ActionBox& box,
                           Rng& rng) {
  const double y = ExpectedSarsaTarget(q_net, tr, policy, k, gamma, box, rng);
  const Vec x = ClippedInput(tr.state, tr.action, box);
  const double residual = q_net.Scalar(x) - y;
  const GradVector g = q_net.ScalarGradient(x);
  ParamVector& p = q_net.mutable_params();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * residual * g[i];
  if (!AllFinite(p.span())) throw NumericError("expected SARSA update diverged; lower lr_q");
  return y;
}

void UpdateCritics(CriticPair& critics, const Trajectory& traj, const GaussianPolicy& policy,
                   double gamma, Rng& rng) {
  const CriticConfig& cfg = critics.config();
  FitVResult fit = FitV(critics.v_net(), std::span<const Trajectory>(&traj, 1), cfg.v_epochs,
                        cfg.lr_v, cfg.v_batch, rng);
  critics.mutable_v_net() = std::move(fit.net);
  for (std::size_t pass = 0; pass < cfg.q_passes; ++pass) {
    for (std::size_t t = 0; t < traj.size(); ++t) {
      const Transition tr{traj.states[t], traj.actions[t], traj.rewards[t], traj.next_states[t],
                          traj.dones[t]};
      ExpectedSarsaUpdate(critics.mutable_q_net(), tr, policy, cfg.expectation_samples, gamma,
                          cfg.lr_q, critics.box(), rng);
    }
  }
}

BanditAdvantageOracle::BanditAdvantageOracle(const EnvSpec& spec, const GaussianPolicy& policy)
    : spec_(spec) {
  if (spec.kind != EnvKind::kBandit) throw UnsupportedError("bandit oracle needs a bandit");
  const Vec s(spec.state_dim, 0.0);
  const double mu = policy.Mean(s)[0];
  const double sigma = policy.sigma()[0];
  constexpr std::size_t kPoints = (1u << 14) + 1;
  const double lo = mu - 8.0 * sigma;
  const double h = 16.0 * sigma / static_cast<double>(kPoints - 1);
  double acc = 0.0;
  for (std::size_t i = 0; i < kPoints; ++i) {
    const double a = lo + h * static_cast<double>(i);
    const double z = (a - mu) / sigma;
    const double density = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * std::numbers::pi));
    const double w = (i == 0 || i + 1 == kPoints) ? 0.5 : 1.0;
    const double av[1] = {a};
    acc += w * density * BanditExpectedReward(spec_, av);
  }
  value_ = acc * h;
}

double BanditAdvantageOracle::Q(std::span<const double> a) const {
  return BanditExpectedReward(spec_, a);
}

double BanditAdvantageOracle::Advantage(std::span<const double>, std::span<const double> a) const {
  return Q(a) - value_;
}

LqrAdvantageOracle::LqrAdvantageOracle(const EnvSpec& spec, const GaussianPolicy& policy)
    : model_(spec, policy) {}

double LqrAdvantageOracle::Advantage(std::span<const double> s, std::span<const double> a) const {
  return model_.Advantage(s, a);
}

std::unique_ptr<AdvantageFunction> MakeAdvantageOracle(const EnvSpec& spec,
                                                       const GaussianPolicy& policy) {
  switch (spec.kind) {
    case EnvKind::kBandit:
      return std::make_unique<BanditAdvantageOracle>(spec, policy);
    case EnvKind::kLqr:
      return std::make_unique<LqrAdvantageOracle>(spec, policy);
    case EnvKind::kPendulum:
      break;
  }
  throw UnsupportedError("no advantage oracle for environment '" + ToString(spec.kind) + "'");
}

MeanSe AdvantageMse(const AdvantageFunction& critic, const AdvantageFunction& oracle,
                    std::span<const StateAction> sample) {
  if (sample.empty()) throw ArgumentError("advantage MSE needs a nonempty sample");
  Vec sq(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& [s, a] = sample[i];
    const double d = critic.Advantage(s, a) - oracle.Advantage(s, a);
    sq[i] = d * d;
  }
  return MeanWithSe(sq);
}

}  // namespace allact
