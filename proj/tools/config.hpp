#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "allact/trainer.hpp"

namespace allact::cli {

struct AnalysisConfig {
  std::size_t pretrain_episodes = 1000;
  std::size_t reference_rollouts = 10000;
  std::size_t estimates = 1000;
  std::vector<std::size_t> ns{1, 2, 4, 8, 16, 32, 64, 128, 256, 512};
  std::size_t reps = 1000;
  std::size_t decomp_states = 16;
  std::vector<std::size_t> decomp_ns{1, 4, 16, 64};
  std::vector<std::size_t> theorem_ns{1, 8, 64};
  std::size_t term_samples = 10000;
  std::string theorem_critic = "both";  // oracle, learned, both
  std::size_t theorem2_rollouts = 100000;
  std::vector<double> theorem2_noise{0.0, 0.5, 1.0};
  std::size_t theorem3_trials = 10000;
  std::vector<double> theorem3_bias{0.0, 0.5, 1.0};
  std::vector<double> theorem3_noise{0.0, 0.5, 1.0};
};

// One compared estimator: kind plus resolution.
struct EstimatorChoice {
  EstimatorKind kind = EstimatorKind::kReinforce;
  std::size_t n = 1;
};

struct Config {
  ExperimentConfig experiment;
  AnalysisConfig analysis;
  std::vector<EstimatorChoice> compare{{EstimatorKind::kReinforce, 1}, {EstimatorKind::kMc, 64}};
  std::uint64_t seed = 0;
  std::size_t num_seeds = 1;
  std::string path;
  std::string text;  // verbatim file contents, echoed into manifests
};

// Parses an INI file. Missing file, syntax errors, unknown sections or keys
// and bad values all raise ArgumentError naming the offending item.
Config LoadConfig(const std::string& path);
Config ParseConfig(const std::string& text, const std::string& origin = "<string>");

// Seeds seed, seed + 1, ..., seed + num_seeds - 1.
std::vector<std::uint64_t> SeedList(std::uint64_t seed, std::size_t num_seeds);

// "reinforce", "mc:64", "quadrature:33".
EstimatorChoice ParseEstimatorChoice(const std::string& text);

std::vector<std::size_t> ParseSizeList(const std::string& text);
std::vector<double> ParseDoubleList(const std::string& text);

// Help text listing every recognized key.
std::string ConfigKeyHelp();

}  // namespace allact::cli
