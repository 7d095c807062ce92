#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "allact/errors.hpp"
#include "commands.hpp"
#include "config.hpp"
#include "io.hpp"

namespace allact::cli {
namespace {

namespace fs = std::filesystem;

const char* kSmallBandit = R"([env]
kind = bandit

[train]
estimator = mc:8
episodes = 30
seed = 0

[analysis]
pretrain_episodes = 50
reference_rollouts = 300
estimates = 40
ns = 1, 4, 16
reps = 50
decomp_states = 4
decomp_ns = 1, 4
theorem_ns = 1, 8, 64
term_samples = 300
theorem2_rollouts = 500
theorem3_trials = 200
)";

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("allact_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("ALLACT_SEED");
  }
  void TearDown() override {
    unsetenv("ALLACT_SEED");
    fs::remove_all(dir_);
  }

  std::string WriteConfig(const std::string& text, const std::string& name = "cfg.ini") {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

  int Run(std::vector<std::string> args) {
    args.insert(args.begin(), "allact");
    out_.str("");
    err_.str("");
    return RunCommand(args, out_, err_);
  }

  nlohmann::json Json(const fs::path& p) { return nlohmann::json::parse(ReadFile(p)); }

  fs::path dir_;
  std::ostringstream out_;
  std::ostringstream err_;
};

TEST(Config, KindSelectsDefaults) {
  const Config c = ParseConfig("[env]\nkind = pendulum\n");
  EXPECT_EQ(c.experiment.env.kind, EnvKind::kPendulum);
  EXPECT_TRUE(c.experiment.policy.hidden.empty());
  EXPECT_EQ(c.experiment.episodes, 400u);
  EXPECT_DOUBLE_EQ(c.experiment.env.pendulum().mass, 0.1);
  EXPECT_DOUBLE_EQ(c.experiment.env.gamma, 0.9);
}

TEST(Config, ParsesEverySection) {
  const Config c = ParseConfig(R"([env]
kind = lqr
gamma = 0.8
horizon = 50
[lqr]
a = 1, 0.1; 0, 1
b = 0; 0.1
[policy]
sigma = 0.2
[critic]
hidden = 16, 8
k = 4
[train]
estimator = quadrature:33
lr = 0.002
seed = 5
num_seeds = 3
[compare]
estimators = reinforce, mc:16, quadrature:65
[analysis]
ns = 1, 2, 3
)");
  EXPECT_DOUBLE_EQ(c.experiment.env.gamma, 0.8);
  EXPECT_EQ(c.experiment.env.horizon, 50u);
  EXPECT_DOUBLE_EQ(c.experiment.env.lqr().b(1, 0), 0.1);
  EXPECT_EQ(c.experiment.critic.hidden, (std::vector<std::size_t>{16, 8}));
  EXPECT_EQ(c.experiment.critic.expectation_samples, 4u);
  EXPECT_EQ(c.experiment.estimator, EstimatorKind::kQuadrature);
  EXPECT_EQ(c.experiment.estimator_n, 33u);
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.num_seeds, 3u);
  ASSERT_EQ(c.compare.size(), 3u);
  EXPECT_EQ(c.compare[2].n, 65u);
  EXPECT_EQ(c.analysis.ns, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    ParseConfig("[train]\nlearning_rate = 0.1\n");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("train.learning_rate"), std::string::npos);
  }
}

TEST(Config, SectionMustMatchKind) {
  EXPECT_THROW(ParseConfig("[env]\nkind = bandit\n[pendulum]\nmass = 1\n"), ArgumentError);
}

TEST(Config, BadValuesRejected) {
  EXPECT_THROW(ParseConfig("[train]\nlr = fast\n"), ArgumentError);
  EXPECT_THROW(ParseConfig("[train]\nepisodes = -3\n"), ArgumentError);
  EXPECT_THROW(ParseConfig("[env]\nkind = cartpole\n"), ArgumentError);
  EXPECT_THROW(ParseConfig("[env]\ngamma = 1.5\n"), ArgumentError);
}

TEST(Config, MissingFileNamesThePath) {
  try {
    LoadConfig("/nonexistent/dir/cfg.ini");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/cfg.ini"), std::string::npos);
  }
}

TEST(Config, EstimatorChoicesAndLists) {
  EXPECT_EQ(ParseEstimatorChoice("mc:64").n, 64u);
  EXPECT_EQ(ParseEstimatorChoice("reinforce").kind, EstimatorKind::kReinforce);
  EXPECT_THROW(ParseEstimatorChoice("mc"), ArgumentError);
  EXPECT_THROW(ParseEstimatorChoice("reinforce:3"), ArgumentError);
  EXPECT_EQ(ParseSizeList("1, 2,4"), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(ParseDoubleList("0.5,-1"), (std::vector<double>{0.5, -1.0}));
  EXPECT_EQ(SeedList(7, 3), (std::vector<std::uint64_t>{7, 8, 9}));
  EXPECT_NE(ConfigKeyHelp().find("critic.lr_q"), std::string::npos);
}

TEST(Io, FloatsRoundTrip) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(FormatDouble(x)), x);
}

TEST(Io, CsvHeadersAreExact) {
  RunRecord r;
  r.scores = {1.5, 2.0};
  r.discounted_returns = {1.0, 1.25};
  r.env_steps = {10, 30};
  const CsvTable curve = ParseCsv(CurveCsv(r));
  EXPECT_EQ(curve.header, (std::vector<std::string>{"episode", "score", "discounted_return", "env_steps"}));
  ASSERT_EQ(curve.rows.size(), 2u);
  EXPECT_EQ(curve.rows[1][3], "30");

  const std::vector<MseSweepRow> rows{{1, 0.5, 100, 0.01, 1.0}, {2, 0.25, 100, 0.005, 1.0}};
  EXPECT_EQ(MseCsv(rows).substr(0, MseCsv(rows).find('\n')), "n_s,mse,n_estimates,se");
  const std::vector<DecompRow> d{{4, VarianceReport{0.1, 0.2, 0.3, 0.01, 8, 10}}};
  EXPECT_EQ(DecompCsv(d).substr(0, DecompCsv(d).find('\n')), "n_s,var_state,expected_cond_var,total_var");
  AggregateCurve agg;
  agg.mean = {1.0};
  agg.half_width = {0.5};
  agg.n_runs = 2;
  const CsvTable a = ParseCsv(AggregateCsv(agg));
  EXPECT_EQ(a.rows[0][a.Column("lower")], FormatDouble(0.5));
  EXPECT_THROW(a.Column("median"), ArgumentError);
}

TEST_F(CliTest, ReadCsvChecksTheSchema) {
  WriteFile(dir_ / "x.csv", "a,b\n1,2\n");
  EXPECT_THROW(ReadCsvWithHeader(dir_ / "x.csv", kMseHeader), ArgumentError);
  EXPECT_EQ(ReadCsvWithHeader(dir_ / "x.csv", "a,b").rows.size(), 1u);
}

TEST(Io, GitBlobDigest) {
  // git hash-object of "hello\n"
  EXPECT_EQ(GitBlobSha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(GitBlobSha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(Io, TheoremJsonKeys) {
  TheoremCheck c;
  c.lhs = 1.0;
  c.rhs = 2.0;
  c.se = 0.1;
  c.satisfied = true;
  const nlohmann::json j = ToJson(c);
  for (const char* key : {"lhs", "rhs", "terms", "satisfied", "se"}) EXPECT_TRUE(j.contains(key)) << key;
}

TEST_F(CliTest, TrainWritesCurveAndManifest) {
  const std::string cfg = WriteConfig(kSmallBandit);
  const fs::path out = dir_ / "train";
  ASSERT_EQ(Run({"train", "--config", cfg, "--seed", "7", "--out", out.string()}), kExitOk) << err_.str();
  ASSERT_TRUE(fs::exists(out / "curve_seed7.csv"));
  ASSERT_TRUE(fs::exists(out / "manifest.json"));
  EXPECT_EQ(ReadCsvWithHeader(out / "curve_seed7.csv", kCurveHeader).rows.size(), 30u);

  const nlohmann::json m = Json(out / "manifest.json");
  EXPECT_EQ(m["master_seed"], 7);
  EXPECT_EQ(m["config"], kSmallBandit);
  EXPECT_EQ(m["versions"].size(), 8u);
  ASSERT_EQ(m["outputs"].size(), 1u);
  const std::string body = ReadFile(out / "curve_seed7.csv");
  EXPECT_EQ(m["outputs"][0]["git_sha1"], GitBlobSha1(body));
  EXPECT_EQ(m["outputs"][0]["bytes"], body.size());
  EXPECT_EQ(m["final_params"]["7"]["params"].size(), 8u * 1 + 8 + 8 + 1);
}

TEST_F(CliTest, IdenticalInvocationsGiveIdenticalBytes) {
  const std::string cfg = WriteConfig(kSmallBandit);
  ASSERT_EQ(Run({"train", "--config", cfg, "--out", (dir_ / "a").string()}), kExitOk);
  ASSERT_EQ(Run({"train", "--config", cfg, "--out", (dir_ / "b").string()}), kExitOk);
  EXPECT_EQ(ReadFile(dir_ / "a" / "curve_seed0.csv"), ReadFile(dir_ / "b" / "curve_seed0.csv"));
  ASSERT_EQ(Run({"mse-sweep", "--config", cfg, "--out", (dir_ / "m1").string()}), kExitOk);
  ASSERT_EQ(Run({"mse-sweep", "--config", cfg, "--out", (dir_ / "m2").string()}), kExitOk);
  EXPECT_EQ(ReadFile(dir_ / "m1" / "mse.csv"), ReadFile(dir_ / "m2" / "mse.csv"));
}

TEST_F(CliTest, SeedPrecedenceFlagThenEnvThenConfig) {
  const std::string cfg = WriteConfig(kSmallBandit);
  setenv("ALLACT_SEED", "3", 1);
  ASSERT_EQ(Run({"train", "--config", cfg, "--out", (dir_ / "env").string()}), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "env" / "curve_seed3.csv"));
  ASSERT_EQ(Run({"train", "--config", cfg, "--seed", "4", "--out", (dir_ / "flag").string()}), kExitOk);
  EXPECT_TRUE(fs::exists(dir_ / "flag" / "curve_seed4.csv"));
}

TEST_F(CliTest, MseSweepHasOneRowPerNs) {
  const std::string cfg = WriteConfig(kSmallBandit);
  const fs::path out = dir_ / "mse";
  ASSERT_EQ(Run({"mse-sweep", "--config", cfg, "--ns", "1,2,4,8,16,32,64,128,256,512", "--estimates", "20", "--out",
                 out.string()}),
            kExitOk)
      << err_.str();
  const CsvTable t = ReadCsvWithHeader(out / "mse.csv", kMseHeader);
  ASSERT_EQ(t.rows.size(), 10u);
  EXPECT_EQ(t.rows[9][0], "512");
  EXPECT_EQ(t.rows[0][t.Column("n_estimates")], "20");
  const nlohmann::json fit = Json(out / "fit.json");
  EXPECT_TRUE(fit.contains("r_squared"));
  EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST_F(CliTest, VarianceDecompWritesCsvAndReport) {
  const std::string cfg = WriteConfig(kSmallBandit);
  const fs::path out = dir_ / "vd";
  ASSERT_EQ(Run({"variance-decomp", "--config", cfg, "--out", out.string()}), kExitOk) << err_.str();
  EXPECT_EQ(ReadCsvWithHeader(out / "decomp.csv", kDecompHeader).rows.size(), 2u);
  EXPECT_EQ(Json(out / "decomp.json").size(), 2u);
}

TEST_F(CliTest, TheoremReportsHaveTheSchema) {
  const std::string cfg = WriteConfig(kSmallBandit);
  for (const char* which : {"1", "2", "3"}) {
    const fs::path out = dir_ / (std::string("t") + which);
    const int code = Run({"theorem-check", "--which", which, "--config", cfg, "--out", out.string()});
    EXPECT_EQ(code, kExitOk) << which << err_.str();
    const nlohmann::json j = Json(out / (std::string("theorem") + which + ".json"));
    ASSERT_FALSE(j["checks"].empty());
    for (const auto& c : j["checks"]) {
      for (const char* key : {"lhs", "rhs", "terms", "satisfied", "se"}) EXPECT_TRUE(c.contains(key)) << key;
    }
  }
}

TEST_F(CliTest, StrictTurnsAFailedCheckIntoExitThree) {
  const std::string cfg = WriteConfig(kSmallBandit);
  // The displayed theorem 3 bound fails in the noiseless biased cells.
  EXPECT_EQ(Run({"theorem-check", "--which", "3", "--config", cfg, "--strict", "--out", (dir_ / "t3").string()}),
            kExitCheckFailed);
}

TEST_F(CliTest, CompareAndReport) {
  const std::string cfg = WriteConfig(std::string(kSmallBandit) + "\n[compare]\nestimators = reinforce, mc:4\n");
  const fs::path out = dir_ / "cmp";
  ASSERT_EQ(Run({"compare", "--config", cfg, "--seeds", "2", "--out", out.string()}), kExitOk) << err_.str();
  EXPECT_TRUE(fs::exists(out / "REINFORCE" / "curve_seed1.csv"));
  EXPECT_TRUE(fs::exists(out / "MC-4" / "aggregate.csv"));
  const CsvTable steps = ReadCsvWithHeader(out / "steps_to_solve.csv", kStepsHeader);
  EXPECT_EQ(steps.rows.size(), 4u);
  ASSERT_EQ(Run({"report", "--in", out.string()}), kExitOk) << err_.str();
  const CsvTable summary = ReadCsvWithHeader(out / "summary.csv", kSummaryHeader);
  ASSERT_EQ(summary.rows.size(), 2u);
  EXPECT_EQ(summary.rows[0][0], "REINFORCE");
  EXPECT_EQ(summary.rows[0][1], "2");
}

TEST_F(CliTest, MissingConfigIsExitOneNamingThePath) {
  EXPECT_EQ(Run({"train", "--config", "/no/such/cfg.ini", "--out", dir_.string()}), kExitConfig);
  EXPECT_NE(err_.str().find("/no/such/cfg.ini"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsAreExitOne) {
  EXPECT_EQ(Run({"fly"}), kExitConfig);
  EXPECT_EQ(Run({"train", "--config", "x", "--out", "y", "--bogus"}), kExitConfig);
  EXPECT_EQ(Run({}), kExitConfig);
  EXPECT_EQ(Run({"theorem-check", "--which", "4", "--out", "y"}), kExitConfig);
}

TEST_F(CliTest, HelpListsConfigKeys) {
  EXPECT_EQ(Run({"--help"}), kExitOk);
  EXPECT_NE(out_.str().find("analysis.theorem2_noise"), std::string::npos);
}

TEST_F(CliTest, UnsupportedCombinationIsExitOne) {
  const std::string cfg = WriteConfig("[env]\nkind = pendulum\n[analysis]\npretrain_episodes = 2\n");
  EXPECT_EQ(Run({"theorem-check", "--which", "2", "--config", cfg, "--out", dir_.string()}), kExitConfig);
}

TEST_F(CliTest, NumericFailureIsExitTwo) {
  const std::string cfg = WriteConfig("[env]\nkind = pendulum\n[critic]\nlr_v = 1e300\n[train]\nepisodes = 5\nwindow = 5\n");
  EXPECT_EQ(Run({"train", "--config", cfg, "--out", (dir_ / "nan").string()}), kExitNumeric);
}

}  // namespace
}  // namespace allact::cli
