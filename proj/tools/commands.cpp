#include "commands.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "allact/errors.hpp"
#include "allact/stats.hpp"
#include "config.hpp"
#include "experiments.hpp"
#include "io.hpp"

namespace allact::cli {

namespace fs = std::filesystem;

namespace {

// Flags shared by the experiment subcommands.
struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool strict = false;
};

void AddCommon(CLI::App* sub, CommonArgs& args, bool config_required = true) {
  auto* opt = sub->add_option("--config", args.config_path, "INI config file");
  if (config_required) opt->required();
  sub->add_option("--out", args.out_dir, "output directory")->required();
  sub->add_option("--seed", args.seed, "master seed (overrides ALLACT_SEED and the config)");
  sub->add_flag("--strict", args.strict, "exit 3 when a check fails");
}

Config LoadWithOverrides(const CommonArgs& args) {
  Config config = args.config_path.empty() ? ParseConfig("", "<defaults>") : LoadConfig(args.config_path);
  if (const char* env = std::getenv("ALLACT_SEED"); env != nullptr && *env != '\0') {
    config.seed = ParseSizeList(env).at(0);
  }
  if (args.seed) config.seed = *args.seed;
  config.experiment.seeds = SeedList(config.seed, config.num_seeds);
  return config;
}

Manifest StartManifest(const std::string& command, const std::vector<std::string>& argv,
                       const Config& config) {
  Manifest manifest(command, argv);
  manifest.SetConfig(config.path, config.text);
  manifest.SetSeed(config.seed);
  return manifest;
}

int Verdict(bool ok, bool strict, std::ostream& err, const std::string& what) {
  err << what << ": " << (ok ? "PASS" : "FAIL") << "\n";
  return (!ok && strict) ? kExitCheckFailed : kExitOk;
}

int CmdTrain(const CommonArgs& args, std::optional<std::size_t> num_seeds,
             const std::string& estimator, std::optional<std::size_t> episodes,
             const std::vector<std::string>& argv, std::ostream& err) {
  Config config = LoadWithOverrides(args);
  if (!estimator.empty()) {
    const EstimatorChoice e = ParseEstimatorChoice(estimator);
    config.experiment.estimator = e.kind;
    config.experiment.estimator_n = e.n;
  }
  if (episodes) config.experiment.episodes = *episodes;
  // An explicit --seed runs that seed alone unless --seeds asks for more.
  const std::size_t count = num_seeds ? *num_seeds : (args.seed ? 1 : config.num_seeds);
  config.experiment.seeds = SeedList(config.seed, count);
  config.experiment.Validate();

  const fs::path out = args.out_dir;
  Manifest manifest = StartManifest("train", argv, config);
  std::vector<RunRecord> records;
  nlohmann::json final_params = nlohmann::json::object();
  bool diverged = false;
  for (std::uint64_t seed : config.experiment.seeds) {
    RunRecord record = Train(config.experiment, seed, [&](std::size_t k, double score) {
      if ((k + 1) % 100 == 0) err << fmt::format("seed {} episode {} score {:.4g}\n", seed, k + 1, score);
    });
    const auto steps = StepsToSolve(record, config.experiment.solve_threshold, config.experiment.window);
    err << fmt::format("{} seed {}: final score {:.4g}, steps to solve {}{}\n",
                       config.experiment.EstimatorLabel(), seed,
                       record.scores.empty() ? 0.0 : record.scores.back(),
                       steps ? std::to_string(*steps) : "none",
                       record.diverged ? " (diverged: " + record.diagnostic + ")" : "");
    manifest.Emit(out, fmt::format("curve_seed{}.csv", seed), CurveCsv(record));
    final_params[std::to_string(seed)] = {{"digest", record.params_digest},
                                          {"params", record.final_params.values()}};
    diverged = diverged || record.diverged;
    records.push_back(std::move(record));
  }
  if (records.size() >= 2 && !diverged) manifest.Emit(out, "aggregate.csv", AggregateCsv(AggregateRuns(records)));
  manifest.Set("estimator", config.experiment.EstimatorLabel());
  manifest.Set("final_params", final_params);
  manifest.Write(out);
  return diverged ? kExitNumeric : kExitOk;
}

int CmdCompare(const CommonArgs& args, std::optional<std::size_t> num_seeds,
               const std::string& estimators, const std::vector<std::string>& argv,
               std::ostream& err) {
  Config config = LoadWithOverrides(args);
  if (!estimators.empty()) {
    config.compare.clear();
    for (const auto& item : CLI::detail::split(estimators, ',')) {
      config.compare.push_back(ParseEstimatorChoice(item));
    }
  }
  if (num_seeds) config.num_seeds = *num_seeds;
  const auto seeds = SeedList(config.seed, config.num_seeds);

  const CompareResult result = RunCompare(config, seeds, [&](const std::string& label, const RunRecord& r) {
    err << fmt::format("{} seed {}: final score {:.4g}{}\n", label, r.seed,
                       r.scores.empty() ? 0.0 : r.scores.back(), r.diverged ? " (diverged)" : "");
  });

  const fs::path out = args.out_dir;
  Manifest manifest = StartManifest("compare", argv, config);
  std::string steps_csv = std::string(kStepsHeader) + "\n";
  for (const CompareEntry& entry : result.entries) {
    for (std::size_t i = 0; i < entry.records.size(); ++i) {
      manifest.Emit(out, fmt::format("{}/curve_seed{}.csv", entry.label, entry.records[i].seed),
                    CurveCsv(entry.records[i]));
      steps_csv += fmt::format("{},{},{},{}\n", entry.records[i].seed, entry.label,
                               entry.steps[i] ? std::to_string(*entry.steps[i]) : "",
                               entry.steps[i] ? 1 : 0);
    }
    const bool equal_length = std::all_of(entry.records.begin(), entry.records.end(), [&](const RunRecord& r) {
      return r.scores.size() == entry.records.front().scores.size();
    });
    if (entry.records.size() >= 2 && equal_length) {
      manifest.Emit(out, entry.label + "/aggregate.csv", AggregateCsv(AggregateRuns(entry.records)));
    }
  }
  manifest.Emit(out, "steps_to_solve.csv", steps_csv);

  bool ok = true;
  nlohmann::json comparisons = nlohmann::json::array();
  const double budget = static_cast<double>(config.experiment.episodes * config.experiment.env.horizon);
  const auto baseline = std::find_if(result.entries.begin(), result.entries.end(),
                                     [](const CompareEntry& e) { return e.label == "REINFORCE"; });
  if (baseline != result.entries.end()) {
    for (const CompareEntry& entry : result.entries) {
      if (&entry == &*baseline) continue;
      const PairedComparison pc = ComparePaired(entry, *baseline, budget);
      const bool pass = pc.win_fraction() >= 0.7 || pc.mean_reduction() >= 0.2;
      ok = ok && pass;
      err << fmt::format("{} vs REINFORCE: fewer steps in {}/{} pairs, mean steps {:.0f} vs {:.0f}\n",
                         entry.label, pc.wins, pc.pairs, pc.challenger_mean_steps,
                         pc.baseline_mean_steps);
      comparisons.push_back({{"challenger", entry.label},
                             {"baseline", "REINFORCE"},
                             {"pairs", pc.pairs},
                             {"wins", pc.wins},
                             {"win_fraction", pc.win_fraction()},
                             {"challenger_mean_steps", pc.challenger_mean_steps},
                             {"baseline_mean_steps", pc.baseline_mean_steps},
                             {"mean_reduction", pc.mean_reduction()},
                             {"budget", budget},
                             {"satisfied", pass}});
    }
  }
  manifest.Emit(out, "comparison.json", comparisons.dump(2) + "\n");
  manifest.Write(out);
  return Verdict(ok, args.strict, err, "sample-efficiency comparison");
}

int CmdMseSweep(const CommonArgs& args, const std::string& ns, std::optional<std::size_t> estimates,
                const std::vector<std::string>& argv, std::ostream& err) {
  Config config = LoadWithOverrides(args);
  if (!ns.empty()) config.analysis.ns = ParseSizeList(ns);
  if (estimates) config.analysis.estimates = *estimates;
  const MseSweepResult result = RunMseSweep(config, config.seed);

  const fs::path out = args.out_dir;
  Manifest manifest = StartManifest("mse-sweep", argv, config);
  manifest.Emit(out, "mse.csv", MseCsv(result.rows));
  bool ok = false;
  if (result.rows.size() >= 3) {
    const double ratio = result.rows.front().mse / result.rows.back().mse;
    ok = result.fit.r_squared >= 0.95 && result.fit.c0 > 0.0 && result.fit.c1 > 0.0 && ratio > 3.0;
    nlohmann::json fit = {{"c0", result.fit.c0},
                          {"c1", result.fit.c1},
                          {"r_squared", result.fit.r_squared},
                          {"first_to_last_ratio", ratio},
                          {"reference_norm", result.rows.front().reference_norm},
                          {"reference_rollouts", result.reference.n_rollouts}};
    manifest.Emit(out, "fit.json", fit.dump(2) + "\n");
    err << fmt::format("fit: c0 = {:.4g}, c1 = {:.4g}, R^2 = {:.4f}, first/last = {:.3g}\n",
                       result.fit.c0, result.fit.c1, result.fit.r_squared, ratio);
  }
  for (const MseSweepRow& row : result.rows) {
    err << fmt::format("N_S = {:>4}: mse {:.5g} (se {:.2g})\n", row.n_s, row.mse, row.se);
  }
  manifest.Write(out);
  return Verdict(ok, args.strict, err, "1/N_S progression");
}

int CmdVarianceDecomp(const CommonArgs& args, std::optional<std::size_t> reps,
                      const std::vector<std::string>& argv, std::ostream& err) {
  Config config = LoadWithOverrides(args);
  if (reps) config.analysis.reps = *reps;
  const std::vector<DecompRow> rows = RunVarianceDecomposition(config, config.seed);

  const fs::path out = args.out_dir;
  Manifest manifest = StartManifest("variance-decomp", argv, config);
  manifest.Emit(out, "decomp.csv", DecompCsv(rows));
  bool ok = true;
  nlohmann::json details = nlohmann::json::array();
  for (const DecompRow& row : rows) {
    const VarianceReport& r = row.report;
    const double sum = r.var_state + r.expected_cond_var;
    const double rel = r.total_var > 0.0 ? std::abs(r.total_var - sum) / r.total_var : std::abs(sum);
    const bool identity = rel <= 0.05;
    const bool conditioning = r.total_var >= r.var_state - 3.0 * r.gap_se;
    ok = ok && identity && conditioning;
    details.push_back({{"n_s", row.n_s},
                       {"relative_error", rel},
                       {"gap_se", r.gap_se},
                       {"identity_within_5pct", identity},
                       {"total_ge_var_state", conditioning},
                       {"n_states", r.n_states},
                       {"reps", r.reps}});
    err << fmt::format("N_S = {:>3}: var_state {:.5g} + E[cond var] {:.5g} vs total {:.5g} (rel err {:.2g})\n",
                       row.n_s, r.var_state, r.expected_cond_var, r.total_var, rel);
  }
  manifest.Emit(out, "decomp.json", details.dump(2) + "\n");
  manifest.Write(out);
  return Verdict(ok, args.strict, err, "law of total variance");
}

int CmdTheorem(const CommonArgs& args, int which, const std::vector<std::string>& argv,
               std::ostream& err) {
  Config config = LoadWithOverrides(args);
  TheoremRun run;
  switch (which) {
    case 1:
      run = RunTheorem1(config, config.seed);
      break;
    case 2:
      run = RunTheorem2(config, config.seed);
      break;
    case 3:
      run = RunTheorem3(config, config.seed);
      break;
    default:
      throw ArgumentError("--which must be 1, 2 or 3");
  }
  const fs::path out = args.out_dir;
  Manifest manifest = StartManifest("theorem-check", argv, config);
  manifest.Emit(out, fmt::format("theorem{}.json", which), run.report.dump(2) + "\n");
  manifest.Write(out);
  std::size_t failed = 0;
  for (const auto& c : run.report["checks"]) failed += c["satisfied"].get<bool>() ? 0 : 1;
  err << fmt::format("theorem {}: {} of {} checks satisfied\n", which,
                     run.report["checks"].size() - failed, run.report["checks"].size());
  return Verdict(run.satisfied, args.strict, err, fmt::format("theorem {} check", which));
}

int CmdReport(const std::string& in_dir, std::string out_dir, const std::vector<std::string>& argv,
              std::ostream& err) {
  if (out_dir.empty()) out_dir = in_dir;
  const fs::path in = in_dir;
  if (!fs::is_directory(in)) throw ArgumentError("report input '" + in_dir + "' is not a directory");
  Manifest manifest("report", argv);
  bool found = false;

  if (fs::exists(in / "steps_to_solve.csv")) {
    found = true;
    const CsvTable steps = ReadCsvWithHeader(in / "steps_to_solve.csv", kStepsHeader);
    std::map<std::string, std::vector<double>> solved_steps;
    std::map<std::string, std::size_t> n_seeds;
    std::vector<std::string> order;
    const std::size_t c_est = steps.Column("estimator");
    const std::size_t c_steps = steps.Column("steps_to_solve");
    const std::size_t c_solved = steps.Column("solved");
    for (const auto& row : steps.rows) {
      const std::string& label = row[c_est];
      if (!n_seeds.count(label)) order.push_back(label);
      ++n_seeds[label];
      if (row[c_solved] == "1") solved_steps[label].push_back(std::stod(row[c_steps]));
    }
    std::string summary = std::string(kSummaryHeader) + "\n";
    for (const std::string& label : order) {
      std::vector<Vec> finals;
      Vec last_scores;
      for (const auto& entry : fs::directory_iterator(in / label)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("curve_seed", 0) != 0) continue;
        const CsvTable curve = ReadCsvWithHeader(entry.path(), kCurveHeader);
        if (!curve.rows.empty()) last_scores.push_back(std::stod(curve.rows.back()[curve.Column("score")]));
      }
      std::sort(last_scores.begin(), last_scores.end());
      const MeanSe final_ms = MeanWithSe(last_scores);
      const double half = last_scores.size() >= 2
                              ? StudentTQuantile(0.95, static_cast<double>(last_scores.size() - 1)) * final_ms.se
                              : 0.0;
      Vec s = solved_steps[label];
      std::sort(s.begin(), s.end());
      const double mean_steps = s.empty() ? std::nan("") : Mean(s);
      const double median = s.empty() ? std::nan("")
                                      : (s.size() % 2 ? s[s.size() / 2] : 0.5 * (s[s.size() / 2 - 1] + s[s.size() / 2]));
      summary += fmt::format("{},{},{},{},{},{},{}\n", label, n_seeds[label], s.size(),
                             s.empty() ? "" : FormatDouble(mean_steps), s.empty() ? "" : FormatDouble(median),
                             FormatDouble(final_ms.mean), FormatDouble(half));
    }
    manifest.Emit(out_dir, "summary.csv", summary);
  }
  if (fs::exists(in / "mse.csv")) {
    found = true;
    const CsvTable mse = ReadCsvWithHeader(in / "mse.csv", kMseHeader);
    std::vector<MseSweepRow> rows;
    for (const auto& row : mse.rows) {
      MseSweepRow r;
      r.n_s = std::stoul(row[mse.Column("n_s")]);
      r.mse = std::stod(row[mse.Column("mse")]);
      r.n_estimates = std::stoul(row[mse.Column("n_estimates")]);
      r.se = std::stod(row[mse.Column("se")]);
      rows.push_back(r);
    }
    const InverseNFit fit = FitInverseN(rows);
    const nlohmann::json j = {{"c0", fit.c0}, {"c1", fit.c1}, {"r_squared", fit.r_squared}};
    manifest.Emit(out_dir, "mse_fit.json", j.dump(2) + "\n");
  }
  if (!found) throw ArgumentError("no steps_to_solve.csv or mse.csv under '" + in_dir + "'");
  manifest.Write(out_dir);
  err << "report written to " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int RunCommand(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"All-action policy-gradient estimators: training, MSE sweeps and bound checks"};
  app.require_subcommand(1);
  app.footer(ConfigKeyHelp());

  CommonArgs train_args;
  std::optional<std::size_t> train_seeds;
  std::string train_estimator;
  std::optional<std::size_t> train_episodes;
  auto* train = app.add_subcommand("train", "train one estimator over one or more seeds");
  AddCommon(train, train_args);
  train->add_option("--seeds", train_seeds, "number of consecutive seeds");
  train->add_option("--estimator", train_estimator, "override: reinforce | mc:N_S | quadrature:N");
  train->add_option("--episodes", train_episodes, "override the episode count");

  CommonArgs compare_args;
  std::optional<std::size_t> compare_seeds;
  std::string compare_estimators;
  auto* compare = app.add_subcommand("compare", "REINFORCE vs all-action estimators on shared seeds");
  AddCommon(compare, compare_args);
  compare->add_option("--seeds", compare_seeds, "number of consecutive seeds");
  compare->add_option("--estimators", compare_estimators, "override compare.estimators");

  CommonArgs sweep_args;
  std::string sweep_ns;
  std::optional<std::size_t> sweep_estimates;
  auto* sweep = app.add_subcommand("mse-sweep", "gradient MSE against N_S");
  AddCommon(sweep, sweep_args);
  sweep->add_option("--ns", sweep_ns, "comma list of N_S");
  sweep->add_option("--estimates", sweep_estimates, "estimates per N_S");

  CommonArgs decomp_args;
  std::optional<std::size_t> decomp_reps;
  auto* decomp = app.add_subcommand("variance-decomp", "law-of-total-variance report");
  AddCommon(decomp, decomp_args);
  decomp->add_option("--reps", decomp_reps, "replications per state");

  CommonArgs theorem_args;
  int which = 0;
  auto* theorem = app.add_subcommand("theorem-check", "empirical check of a bound");
  AddCommon(theorem, theorem_args, false);
  theorem->add_option("--which", which, "1, 2 or 3")->required()->check(CLI::Range(1, 3));

  std::string report_in;
  std::string report_out;
  auto* report = app.add_subcommand("report", "aggregate CSV outputs into summary tables");
  report->add_option("--in", report_in, "directory written by compare or mse-sweep")->required();
  report->add_option("--out", report_out, "output directory (default: --in)");

  std::vector<const char*> cargv;
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*train) return CmdTrain(train_args, train_seeds, train_estimator, train_episodes, argv, err);
    if (*compare) return CmdCompare(compare_args, compare_seeds, compare_estimators, argv, err);
    if (*sweep) return CmdMseSweep(sweep_args, sweep_ns, sweep_estimates, argv, err);
    if (*decomp) return CmdVarianceDecomp(decomp_args, decomp_reps, argv, err);
    if (*theorem) return CmdTheorem(theorem_args, which, argv, err);
    if (*report) return CmdReport(report_in, report_out, argv, err);
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  err << app.help();
  return kExitConfig;
}

}  // namespace allact::cli
