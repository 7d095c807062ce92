#pragma once

#include <cstdint>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "allact/analysis.hpp"
#include "allact/trainer.hpp"
#include "config.hpp"
#include "io.hpp"

namespace allact::cli {

// Trains for analysis.pretrain_episodes with the configured estimator and
// returns the frozen policy and critics.
TrainOutput Pretrain(const Config& config, std::uint64_t seed);

struct MseSweepResult {
  ReferenceResult reference;
  std::vector<MseSweepRow> rows;
  InverseNFit fit;
};

MseSweepResult RunMseSweep(const Config& config, std::uint64_t seed);

std::vector<DecompRow> RunVarianceDecomposition(const Config& config, std::uint64_t seed);

struct TheoremRun {
  nlohmann::json report;  // {which, env, satisfied, checks: [...]}
  bool satisfied = false;
};

TheoremRun RunTheorem1(const Config& config, std::uint64_t seed);
TheoremRun RunTheorem2(const Config& config, std::uint64_t seed);
TheoremRun RunTheorem3(const Config& config, std::uint64_t seed);

struct CompareEntry {
  std::string label;
  std::vector<RunRecord> records;
  std::vector<std::optional<std::size_t>> steps;
};

struct CompareResult {
  std::vector<CompareEntry> entries;
  std::vector<std::uint64_t> seeds;
};

using RunLogger = std::function<void(const std::string& label, const RunRecord& record)>;

CompareResult RunCompare(const Config& config, const std::vector<std::uint64_t>& seeds,
                         const RunLogger& log = {});

// Pairwise comparison of two entries' steps-to-solve. A run that never
// solves is censored at `budget` steps (episodes x horizon), and only a
// solving run can win.
struct PairedComparison {
  std::size_t pairs = 0;
  std::size_t wins = 0;  // challenger strictly fewer steps
  double challenger_mean_steps = 0.0;
  double baseline_mean_steps = 0.0;
  double win_fraction() const { return pairs ? static_cast<double>(wins) / pairs : 0.0; }
  double mean_reduction() const {
    return baseline_mean_steps > 0.0 ? 1.0 - challenger_mean_steps / baseline_mean_steps : 0.0;
  }
};

PairedComparison ComparePaired(const CompareEntry& challenger, const CompareEntry& baseline,
                               double budget);

}  // namespace allact::cli
