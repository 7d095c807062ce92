#include "allact/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "allact/errors.hpp"
#include "allact/stats.hpp"

namespace allact {

void ExperimentConfig::Validate() const {
  env.Validate();
  if (episodes < 1) throw ArgumentError("episodes must be >= 1");
  if (seeds.empty()) throw ArgumentError("at least one seed is required");
  if (window < 1 || window > episodes) throw ArgumentError("window must lie in [1, episodes]");
  if (policy.sigma.size() != env.action_dim) {
    throw ArgumentError("policy sigma needs one entry per action dimension");
  }
  if (!(policy_lr >= 0.0)) throw ArgumentError("policy learning rate must be >= 0");
  if (!(max_grad_norm >= 0.0)) throw ArgumentError("max_grad_norm must be >= 0");
  if (critic.expectation_samples < 1) throw ArgumentError("expected SARSA needs K >= 1");
  if (estimator != EstimatorKind::kReinforce && estimator_n < 1) {
    throw ArgumentError("estimator resolution must be >= 1");
  }
  if (estimator == EstimatorKind::kQuadrature) {
    if (estimator_n < 2) throw ArgumentError("quadrature needs at least two grid points");
    if (env.action_dim != 1) {
      throw UnsupportedError("fixed-grid quadrature supports one-dimensional actions only");
    }
  }
}

std::string ExperimentConfig::EstimatorLabel() const {
  switch (estimator) {
    case EstimatorKind::kReinforce:
      return "REINFORCE";
    case EstimatorKind::kMc:
      return fmt::format("MC-{}", estimator_n);
    case EstimatorKind::kQuadrature:
      return fmt::format("QUAD-{}", estimator_n);
  }
  return "unknown";
}

bool RunRecord::SameOutcome(const RunRecord& other) const {
  return seed == other.seed && scores == other.scores &&
         discounted_returns == other.discounted_returns && env_steps == other.env_steps &&
         params_digest == other.params_digest && diverged == other.diverged;
}

GaussianPolicy MakePolicy(const ExperimentConfig& config, Rng& rng) {
  Architecture arch =
      Architecture::Mlp(config.env.state_dim, config.policy.hidden, config.env.action_dim);
  ParamVector params = InitParams(arch, rng, config.policy.init_scale);
  return GaussianPolicy(Network(std::move(arch), std::move(params)), config.policy.sigma,
                        config.env.box);
}

std::string ParamsDigest(const ParamVector& params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : params) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  return fmt::format("{:016x}", h);
}

TrainOutput TrainFull(const ExperimentConfig& config, std::uint64_t seed,
                      const ProgressFn& progress) {
  config.Validate();
  const Rng master(seed);
  Rng init_rng = master.Split(Stream::kInit);
  Rng rollout_rng = master.Split(Stream::kRollout);
  Rng critic_rng = master.Split(Stream::kCritic);
  Rng estimator_rng = master.Split(Stream::kEstimator);

  GaussianPolicy policy = MakePolicy(config, init_rng);
  CriticPair critics = CriticPair::Create(config.env.state_dim, config.env.box, config.critic,
                                          init_rng);
  RunRecord record;
  record.seed = seed;
  const AllActionConfig all_action{config.estimator, config.estimator_n};
  std::size_t steps = 0;

  for (std::size_t k = 0; k < config.episodes; ++k) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const Trajectory traj = Rollout(config.env, policy, rollout_rng);
      UpdateCritics(critics, traj, policy, config.env.gamma, critic_rng);
      GradVector grad =
          config.estimator == EstimatorKind::kReinforce
              ? ReinforceEstimate(traj, policy, critics.v_net()).grad
              : TrajectoryEstimate(policy, critics, traj, all_action, estimator_rng).grad;
      if (config.max_grad_norm > 0.0) {
        const double norm = std::sqrt(SquaredNorm(grad));
        if (norm > config.max_grad_norm) {
          const double scale = config.max_grad_norm / norm;
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= scale;
        }
      }
      const double step =
          config.lr_decay ? config.policy_lr / std::sqrt(static_cast<double>(k + 1))
                          : config.policy_lr;
      Ascend(step, grad, policy.mutable_params());
      if (!AllFinite(policy.params().span())) {
        throw NumericError("policy parameters became non-finite");
      }
      steps += traj.size();
      record.scores.push_back(traj.Score());
      record.discounted_returns.push_back(traj.returns[0]);
      record.env_steps.push_back(steps);
    } catch (const NumericError& e) {
      record.diverged = true;
      record.diagnostic = fmt::format("episode {}: {}", k, e.what());
      break;
    }
    record.wall_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (progress) progress(k, record.scores.back());
  }
  record.final_params = policy.params();
  record.params_digest = ParamsDigest(policy.params());
  return TrainOutput{std::move(record), std::move(policy), std::move(critics)};
}

RunRecord Train(const ExperimentConfig& config, std::uint64_t seed, const ProgressFn& progress) {
  return TrainFull(config, seed, progress).record;
}

std::optional<std::size_t> StepsToSolve(const RunRecord& record, double threshold,
                                        std::size_t window) {
  if (window < 1) throw ArgumentError("window must be >= 1");
  if (record.scores.size() < window) return std::nullopt;
  CompensatedSum sum;
  for (std::size_t i = 0; i < window; ++i) sum.Add(record.scores[i]);
  const double w = static_cast<double>(window);
  for (std::size_t i = window - 1;; ++i) {
    if (sum.value() / w >= threshold) return record.env_steps[i];
    if (i + 1 >= record.scores.size()) break;
    sum.Add(record.scores[i + 1]);
    sum.Add(-record.scores[i + 1 - window]);
  }
  return std::nullopt;
}

AggregateCurve AggregateSeries(std::span<const Vec> series) {
  if (series.size() < 2) throw ArgumentError("aggregation needs at least two runs");
  const std::size_t len = series.front().size();
  for (const Vec& s : series) {
    if (s.size() != len) throw ArgumentError("runs to aggregate must have equal length");
  }
  const std::size_t n = series.size();
  const double t = StudentTQuantile(0.95, static_cast<double>(n - 1));
  AggregateCurve curve;
  curve.n_runs = n;
  curve.mean.resize(len);
  curve.half_width.resize(len);
  Vec column(n);
  for (std::size_t e = 0; e < len; ++e) {
    for (std::size_t r = 0; r < n; ++r) column[r] = series[r][e];
    const MeanSe ms = MeanWithSe(column);
    curve.mean[e] = ms.mean;
    curve.half_width[e] = t * ms.se;
  }
  return curve;
}

AggregateCurve AggregateRuns(std::span<const RunRecord> records) {
  std::vector<Vec> series;
  series.reserve(records.size());
  for (const RunRecord& r : records) series.push_back(r.scores);
  return AggregateSeries(series);
}

}  // namespace allact
