#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "allact/critic.hpp"
#include "allact/envs.hpp"
#include "allact/estimators.hpp"
#include "allact/policy.hpp"

namespace allact {

struct PolicyConfig {
  std::vector<std::size_t> hidden;  // empty: linear mean
  Vec sigma{0.5};
  double init_scale = 1.0;
};

struct ExperimentConfig {
  EnvSpec env;
  PolicyConfig policy;
  CriticConfig critic;
  EstimatorKind estimator = EstimatorKind::kReinforce;
  std::size_t estimator_n = 1;  // N_S for MC, grid size for quadrature
  double policy_lr = 0.01;
  bool lr_decay = false;        // delta_k = policy_lr / sqrt(k + 1)
  double max_grad_norm = 0.0;   // rescale larger gradients; 0 disables
  std::size_t episodes = 100;
  std::vector<std::uint64_t> seeds{0};
  double solve_threshold = 0.0;
  std::size_t window = 1;

  void Validate() const;
  // "REINFORCE", "MC-64", "QUAD-16".
  std::string EstimatorLabel() const;
};

struct RunRecord {
  std::uint64_t seed = 0;
  Vec scores;             // undiscounted episode return
  Vec discounted_returns; // G_0
  Vec wall_seconds;       // per episode; excluded from equality
  std::vector<std::size_t> env_steps;  // cumulative
  std::string params_digest;
  ParamVector final_params;
  bool diverged = false;
  std::string diagnostic;

  std::size_t episodes() const { return scores.size(); }
  bool SameOutcome(const RunRecord& other) const;
};

GaussianPolicy MakePolicy(const ExperimentConfig& config, Rng& rng);

// 64-bit FNV-1a over the parameter bytes, as 16 hex digits.
std::string ParamsDigest(const ParamVector& params);

struct TrainOutput {
  RunRecord record;
  GaussianPolicy policy;
  CriticPair critics;
};

using ProgressFn = std::function<void(std::size_t episode, double score)>;

// Per episode: one rollout, the critic round, one estimator call, one ascent
// step. Divergence (non-finite values) stops the run with diverged set and a
// diagnostic; the record then holds the episodes completed so far.
TrainOutput TrainFull(const ExperimentConfig& config, std::uint64_t seed,
                      const ProgressFn& progress = {});
RunRecord Train(const ExperimentConfig& config, std::uint64_t seed,
                const ProgressFn& progress = {});

// Cumulative env steps at the first episode whose trailing window average
// reaches the threshold.
std::optional<std::size_t> StepsToSolve(const RunRecord& record, double threshold,
                                        std::size_t window);

struct AggregateCurve {
  Vec mean;
  Vec half_width;  // t_{0.95, n-1} sd / sqrt(n)
  std::size_t n_runs = 0;

  double lower(std::size_t i) const { return mean[i] - half_width[i]; }
  double upper(std::size_t i) const { return mean[i] + half_width[i]; }
};

// Student-t 90% band per episode over records of equal length.
AggregateCurve AggregateRuns(std::span<const RunRecord> records);
AggregateCurve AggregateSeries(std::span<const Vec> series);

}  // namespace allact
