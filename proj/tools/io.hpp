#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "allact/analysis.hpp"
#include "allact/trainer.hpp"

namespace allact::cli {

inline constexpr const char* kCurveHeader = "episode,score,discounted_return,env_steps";
inline constexpr const char* kMseHeader = "n_s,mse,n_estimates,se";
inline constexpr const char* kDecompHeader = "n_s,var_state,expected_cond_var,total_var";
inline constexpr const char* kStepsHeader = "seed,estimator,steps_to_solve,solved";
inline constexpr const char* kAggregateHeader = "episode,mean,lower,upper,n_runs";
inline constexpr const char* kSummaryHeader =
    "estimator,n_seeds,n_solved,mean_steps,median_steps,final_mean,final_half_width";

// 17 significant digits: parses back to the same double.
std::string FormatDouble(double x);

std::string CurveCsv(const RunRecord& record);
std::string MseCsv(std::span<const MseSweepRow> rows);

struct DecompRow {
  std::size_t n_s = 0;
  VarianceReport report;
};
std::string DecompCsv(std::span<const DecompRow> rows);
std::string AggregateCsv(const AggregateCurve& curve);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t Column(const std::string& name) const;  // ArgumentError naming a missing column
};

CsvTable ParseCsv(const std::string& text);
CsvTable ReadCsv(const std::filesystem::path& path);
// Reads and checks the header against an exact schema.
CsvTable ReadCsvWithHeader(const std::filesystem::path& path, const std::string& header);

std::string ReadFile(const std::filesystem::path& path);
void WriteFile(const std::filesystem::path& path, const std::string& content);

// SHA-1 of "blob <size>\0<content>", the digest git assigns to a file.
std::string GitBlobSha1(const std::string& content);

nlohmann::json ToJson(const TheoremCheck& check);

// Collects written files and records them with their digests.
class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv);

  void SetConfig(const std::string& path, const std::string& text);
  void SetSeed(std::uint64_t seed) { seed_ = seed; }
  void Set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }

  // Writes content below out_dir and records it.
  void Emit(const std::filesystem::path& out_dir, const std::string& relative,
            const std::string& content);

  // Writes manifest.json into out_dir.
  void Write(const std::filesystem::path& out_dir);

 private:
  std::string command_;
  std::vector<std::string> argv_;
  std::string config_path_;
  std::string config_text_;
  std::uint64_t seed_ = 0;
  std::string started_;
  nlohmann::json outputs_ = nlohmann::json::array();
  nlohmann::json extra_ = nlohmann::json::object();
};

}  // namespace allact::cli
