#include "io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "allact/errors.hpp"
#include "allact/version.hpp"

namespace allact::cli {

std::string FormatDouble(double x) { return fmt::format("{:.17g}", x); }

std::string CurveCsv(const RunRecord& record) {
  std::string out = std::string(kCurveHeader) + "\n";
  for (std::size_t e = 0; e < record.scores.size(); ++e) {
    out += fmt::format("{},{},{},{}\n", e, FormatDouble(record.scores[e]),
                       FormatDouble(record.discounted_returns[e]), record.env_steps[e]);
  }
  return out;
}

std::string MseCsv(std::span<const MseSweepRow> rows) {
  std::string out = std::string(kMseHeader) + "\n";
  for (const MseSweepRow& r : rows) {
    out += fmt::format("{},{},{},{}\n", r.n_s, FormatDouble(r.mse), r.n_estimates,
                       FormatDouble(r.se));
  }
  return out;
}

std::string DecompCsv(std::span<const DecompRow> rows) {
  std::string out = std::string(kDecompHeader) + "\n";
  for (const DecompRow& r : rows) {
    out += fmt::format("{},{},{},{}\n", r.n_s, FormatDouble(r.report.var_state),
                       FormatDouble(r.report.expected_cond_var), FormatDouble(r.report.total_var));
  }
  return out;
}

std::string AggregateCsv(const AggregateCurve& curve) {
  std::string out = std::string(kAggregateHeader) + "\n";
  for (std::size_t e = 0; e < curve.mean.size(); ++e) {
    out += fmt::format("{},{},{},{},{}\n", e, FormatDouble(curve.mean[e]),
                       FormatDouble(curve.lower(e)), FormatDouble(curve.upper(e)), curve.n_runs);
  }
  return out;
}

std::size_t CsvTable::Column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ArgumentError("CSV is missing column '" + name + "'");
}

namespace {

std::vector<std::string> SplitLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

CsvTable ParseCsv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = SplitLine(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size()) {
        throw ArgumentError(fmt::format("CSV row has {} cells, header has {}", cells.size(),
                                        table.header.size()));
      }
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw ArgumentError("CSV is empty");
  return table;
}

CsvTable ReadCsv(const std::filesystem::path& path) {
  try {
    return ParseCsv(ReadFile(path));
  } catch (const ArgumentError& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

CsvTable ReadCsvWithHeader(const std::filesystem::path& path, const std::string& header) {
  CsvTable table = ReadCsv(path);
  const CsvTable expected = ParseCsv(header + "\n");
  for (const std::string& column : expected.header) {
    try {
      table.Column(column);
    } catch (const ArgumentError& e) {
      throw ArgumentError(path.string() + ": " + e.what());
    }
  }
  return table;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw ArgumentError("failed writing '" + path.string() + "'");
}

std::string GitBlobSha1(const std::string& content) {
  const std::string header = fmt::format("blob {}", content.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("EVP_MD_CTX_new failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size() + 1) == 1 &&
                  EVP_DigestUpdate(ctx, content.data(), content.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("SHA-1 computation failed");
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

nlohmann::json ToJson(const TheoremCheck& check) {
  return {{"lhs", check.lhs},
          {"rhs", check.rhs},
          {"se", check.se},
          {"satisfied", check.satisfied},
          {"terms",
           {{"M", check.terms.m},
            {"L_adv", check.terms.l_adv},
            {"L", check.terms.l},
            {"xi", check.terms.xi},
            {"d", check.terms.d},
            {"n_s", check.terms.n_s}}}};
}

namespace {

std::string UtcNow() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Manifest::Manifest(std::string command, std::vector<std::string> argv)
    : command_(std::move(command)), argv_(std::move(argv)), started_(UtcNow()) {}

void Manifest::SetConfig(const std::string& path, const std::string& text) {
  config_path_ = path;
  config_text_ = text;
}

void Manifest::Emit(const std::filesystem::path& out_dir, const std::string& relative,
                    const std::string& content) {
  WriteFile(out_dir / relative, content);
  outputs_.push_back({{"file", relative}, {"git_sha1", GitBlobSha1(content)},
                      {"bytes", content.size()}});
}

void Manifest::Write(const std::filesystem::path& out_dir) {
  nlohmann::json m;
  m["command"] = command_;
  m["argv"] = argv_;
  m["config_path"] = config_path_;
  m["config"] = config_text_;
  m["master_seed"] = seed_;
  nlohmann::json versions;
  for (const char* module : kModules) versions[module] = kVersion;
  m["versions"] = versions;
  m["outputs"] = outputs_;
  m["started_utc"] = started_;
  m["finished_utc"] = UtcNow();
  for (const auto& [key, value] : extra_.items()) m[key] = value;
  WriteFile(out_dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace allact::cli
