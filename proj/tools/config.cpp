#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "allact/errors.hpp"

namespace allact::cli {

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> Split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) parts.push_back(Trim(item));
  return parts;
}

double ToDouble(const std::string& text) {
  const std::string t = Trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ArgumentError("expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t ToUnsigned(const std::string& text) {
  const std::string t = Trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ArgumentError("expected a nonnegative integer, got '" + text + "'");
  }
  return v;
}

bool ToBool(const std::string& text) {
  const std::string t = Trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ArgumentError("expected a boolean, got '" + text + "'");
}

// "1, 0.1; 0, 1" -> 2 x 2, rows separated by ';'.
Eigen::MatrixXd ToMatrix(const std::string& text) {
  const auto rows = Split(text, ';');
  std::vector<std::vector<double>> values;
  for (const auto& row : rows) {
    if (row.empty()) continue;
    values.push_back(ParseDoubleList(row));
  }
  if (values.empty()) throw ArgumentError("empty matrix");
  const std::size_t cols = values.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < values.size(); ++r) {
    if (values[r].size() != cols) throw ArgumentError("matrix rows differ in length: '" + text + "'");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r][c];
    }
  }
  return m;
}

struct Key {
  std::string help;
  std::function<void(Config&, const std::string&)> set;
};

BanditParams& Bandit(Config& c) { return std::get<BanditParams>(c.experiment.env.params); }
LqrParams& Lqr(Config& c) { return std::get<LqrParams>(c.experiment.env.params); }
PendulumParams& Pendulum(Config& c) { return std::get<PendulumParams>(c.experiment.env.params); }

template <typename P>
void RequireKind(Config& c, EnvKind kind) {
  if (c.experiment.env.kind != kind || !std::holds_alternative<P>(c.experiment.env.params)) {
    throw ArgumentError("section [" + ToString(kind) + "] does not match env.kind = " +
                        ToString(c.experiment.env.kind));
  }
}

#define BANDIT(field) \
  [](Config& c, const std::string& v) { RequireKind<BanditParams>(c, EnvKind::kBandit); Bandit(c).field = ToDouble(v); }
#define PENDULUM(field) \
  [](Config& c, const std::string& v) { RequireKind<PendulumParams>(c, EnvKind::kPendulum); Pendulum(c).field = ToDouble(v); }

const std::map<std::string, Key>& Registry() {
  static const std::map<std::string, Key> keys = {
      {"env.kind", {"bandit | lqr | pendulum (read first; selects the defaults)", {}}},
      {"env.gamma", {"discount factor in [0, 1)",
                     [](Config& c, const std::string& v) { c.experiment.env.gamma = ToDouble(v); }}},
      {"env.horizon", {"episode length T",
                       [](Config& c, const std::string& v) { c.experiment.env.horizon = ToUnsigned(v); }}},
      {"env.action_low", {"comma list, one bound per action dimension",
                          [](Config& c, const std::string& v) {
                            c.experiment.env.box = ActionBox(ParseDoubleList(v), c.experiment.env.box.high);
                          }}},
      {"env.action_high", {"comma list, one bound per action dimension",
                           [](Config& c, const std::string& v) {
                             c.experiment.env.box = ActionBox(c.experiment.env.box.low, ParseDoubleList(v));
                           }}},
      {"bandit.target", {"optimal action a*", BANDIT(target)}},
      {"bandit.noise_std", {"reward noise standard deviation", BANDIT(noise_std)}},
      {"bandit.reward_scale", {"multiplies the quadratic reward and the noise", BANDIT(reward_scale)}},
      {"lqr.a", {"state matrix, rows separated by ';'",
                 [](Config& c, const std::string& v) { RequireKind<LqrParams>(c, EnvKind::kLqr); Lqr(c).a = ToMatrix(v); }}},
      {"lqr.b", {"input matrix", [](Config& c, const std::string& v) { RequireKind<LqrParams>(c, EnvKind::kLqr); Lqr(c).b = ToMatrix(v); }}},
      {"lqr.state_cost", {"state cost Qc", [](Config& c, const std::string& v) { RequireKind<LqrParams>(c, EnvKind::kLqr); Lqr(c).state_cost = ToMatrix(v); }}},
      {"lqr.action_cost", {"action cost Rc", [](Config& c, const std::string& v) { RequireKind<LqrParams>(c, EnvKind::kLqr); Lqr(c).action_cost = ToMatrix(v); }}},
      {"lqr.init_low", {"initial state lower bounds", [](Config& c, const std::string& v) { RequireKind<LqrParams>(c, EnvKind::kLqr); Lqr(c).init_low = ParseDoubleList(v); }}},
      {"lqr.init_high", {"initial state upper bounds", [](Config& c, const std::string& v) { RequireKind<LqrParams>(c, EnvKind::kLqr); Lqr(c).init_high = ParseDoubleList(v); }}},
      {"pendulum.mass", {"bob mass", PENDULUM(mass)}},
      {"pendulum.length", {"rod length", PENDULUM(length)}},
      {"pendulum.gravity", {"gravitational acceleration", PENDULUM(gravity)}},
      {"pendulum.damping", {"viscous damping", PENDULUM(damping)}},
      {"pendulum.dt", {"integration step", PENDULUM(dt)}},
      {"pendulum.init_angle", {"initial angle drawn from [-x, x]", PENDULUM(init_angle)}},
      {"pendulum.init_velocity", {"initial velocity drawn from [-x, x]", PENDULUM(init_velocity)}},
      {"pendulum.fall_angle", {"episode ends beyond this |angle|", PENDULUM(fall_angle)}},
      {"pendulum.alive_bonus", {"per-step bonus", PENDULUM(alive_bonus)}},
      {"pendulum.angle_weight", {"cost weight on angle^2", PENDULUM(angle_weight)}},
      {"pendulum.velocity_weight", {"cost weight on velocity^2", PENDULUM(velocity_weight)}},
      {"pendulum.torque_weight", {"cost weight on torque^2", PENDULUM(torque_weight)}},
      {"policy.hidden", {"comma list of tanh hidden widths; empty for a linear mean",
                         [](Config& c, const std::string& v) { c.experiment.policy.hidden = ParseSizeList(v); }}},
      {"policy.sigma", {"comma list of fixed standard deviations",
                        [](Config& c, const std::string& v) { c.experiment.policy.sigma = ParseDoubleList(v); }}},
      {"policy.init_scale", {"weight init scale",
                             [](Config& c, const std::string& v) { c.experiment.policy.init_scale = ToDouble(v); }}},
      {"critic.hidden", {"hidden widths of both critic networks",
                         [](Config& c, const std::string& v) { c.experiment.critic.hidden = ParseSizeList(v); }}},
      {"critic.lr_q", {"expected SARSA step size",
                       [](Config& c, const std::string& v) { c.experiment.critic.lr_q = ToDouble(v); }}},
      {"critic.lr_v", {"value regression step size",
                       [](Config& c, const std::string& v) { c.experiment.critic.lr_v = ToDouble(v); }}},
      {"critic.k", {"next-action samples in the SARSA target",
                    [](Config& c, const std::string& v) { c.experiment.critic.expectation_samples = ToUnsigned(v); }}},
      {"critic.v_epochs", {"value regression epochs per episode",
                           [](Config& c, const std::string& v) { c.experiment.critic.v_epochs = ToUnsigned(v); }}},
      {"critic.v_batch", {"value regression mini-batch size",
                          [](Config& c, const std::string& v) { c.experiment.critic.v_batch = ToUnsigned(v); }}},
      {"critic.q_passes", {"SARSA passes over each episode",
                           [](Config& c, const std::string& v) { c.experiment.critic.q_passes = ToUnsigned(v); }}},
      {"train.estimator", {"reinforce | mc:N_S | quadrature:N",
                           [](Config& c, const std::string& v) {
                             const EstimatorChoice e = ParseEstimatorChoice(v);
                             c.experiment.estimator = e.kind;
                             c.experiment.estimator_n = e.n;
                           }}},
      {"train.lr", {"policy step size",
                    [](Config& c, const std::string& v) { c.experiment.policy_lr = ToDouble(v); }}},
      {"train.lr_decay", {"divide the step size by sqrt(k + 1)",
                          [](Config& c, const std::string& v) { c.experiment.lr_decay = ToBool(v); }}},
      {"train.max_grad_norm", {"rescale larger policy gradients; 0 disables",
                               [](Config& c, const std::string& v) { c.experiment.max_grad_norm = ToDouble(v); }}},
      {"train.episodes", {"episodes per run",
                          [](Config& c, const std::string& v) { c.experiment.episodes = ToUnsigned(v); }}},
      {"train.seed", {"master seed (ALLACT_SEED overrides)",
                      [](Config& c, const std::string& v) { c.seed = ToUnsigned(v); }}},
      {"train.num_seeds", {"runs use seeds seed .. seed + num_seeds - 1",
                           [](Config& c, const std::string& v) { c.num_seeds = ToUnsigned(v); }}},
      {"train.solve_threshold", {"trailing-average score that counts as solved",
                                 [](Config& c, const std::string& v) { c.experiment.solve_threshold = ToDouble(v); }}},
      {"train.window", {"trailing window for the solve test",
                        [](Config& c, const std::string& v) { c.experiment.window = ToUnsigned(v); }}},
      {"compare.estimators", {"comma list of estimators, e.g. reinforce,mc:64,quadrature:33",
                              [](Config& c, const std::string& v) {
                                c.compare.clear();
                                for (const auto& item : Split(v, ',')) {
                                  if (!item.empty()) c.compare.push_back(ParseEstimatorChoice(item));
                                }
                                if (c.compare.empty()) throw ArgumentError("compare.estimators is empty");
                              }}},
      {"analysis.pretrain_episodes", {"training episodes before freezing",
                                      [](Config& c, const std::string& v) { c.analysis.pretrain_episodes = ToUnsigned(v); }}},
      {"analysis.reference_rollouts", {"REINFORCE estimates in the reference gradient",
                                       [](Config& c, const std::string& v) { c.analysis.reference_rollouts = ToUnsigned(v); }}},
      {"analysis.estimates", {"estimates per N_S in the MSE sweep",
                              [](Config& c, const std::string& v) { c.analysis.estimates = ToUnsigned(v); }}},
      {"analysis.ns", {"N_S values of the MSE sweep",
                       [](Config& c, const std::string& v) { c.analysis.ns = ParseSizeList(v); }}},
      {"analysis.reps", {"replications per state in the variance decomposition",
                         [](Config& c, const std::string& v) { c.analysis.reps = ToUnsigned(v); }}},
      {"analysis.decomp_states", {"states in the variance decomposition",
                                  [](Config& c, const std::string& v) { c.analysis.decomp_states = ToUnsigned(v); }}},
      {"analysis.decomp_ns", {"N_S values of the variance decomposition",
                              [](Config& c, const std::string& v) { c.analysis.decomp_ns = ParseSizeList(v); }}},
      {"analysis.theorem_ns", {"N_S values of the theorem 1 check",
                               [](Config& c, const std::string& v) { c.analysis.theorem_ns = ParseSizeList(v); }}},
      {"analysis.term_samples", {"draws for L and the advantage MSE",
                                 [](Config& c, const std::string& v) { c.analysis.term_samples = ToUnsigned(v); }}},
      {"analysis.theorem_critic", {"oracle | learned | both",
                                   [](Config& c, const std::string& v) {
                                     const std::string t = Trim(v);
                                     if (t != "oracle" && t != "learned" && t != "both") {
                                       throw ArgumentError("analysis.theorem_critic must be oracle, learned or both");
                                     }
                                     c.analysis.theorem_critic = t;
                                   }}},
      {"analysis.theorem2_rollouts", {"rollouts in the theorem 2 check",
                                      [](Config& c, const std::string& v) { c.analysis.theorem2_rollouts = ToUnsigned(v); }}},
      {"analysis.theorem2_noise", {"bandit noise_std values for the theorem 2 check",
                                   [](Config& c, const std::string& v) { c.analysis.theorem2_noise = ParseDoubleList(v); }}},
      {"analysis.theorem3_trials", {"draws per point in the theorem 3 check",
                                    [](Config& c, const std::string& v) { c.analysis.theorem3_trials = ToUnsigned(v); }}},
      {"analysis.theorem3_bias", {"bias magnitudes of the theorem 3 grid",
                                  [](Config& c, const std::string& v) { c.analysis.theorem3_bias = ParseDoubleList(v); }}},
      {"analysis.theorem3_noise", {"noise scales of the theorem 3 grid",
                                   [](Config& c, const std::string& v) { c.analysis.theorem3_noise = ParseDoubleList(v); }}},
  };
  return keys;
}

#undef BANDIT
#undef PENDULUM

void ApplyKindDefaults(Config& c, EnvKind kind) {
  ExperimentConfig& e = c.experiment;
  e.env = DefaultSpec(kind);
  switch (kind) {
    case EnvKind::kBandit:
      e.policy.hidden = {8};
      e.policy.sigma = {0.5};
      e.policy_lr = 0.05;
      e.episodes = 200;
      e.solve_threshold = -0.3;
      e.window = 10;
      e.critic.q_passes = 3;
      break;
    case EnvKind::kLqr:
      e.policy.hidden = {};
      e.policy.sigma = {0.3};
      e.policy.init_scale = 0.0;
      e.policy_lr = 0.003;
      e.max_grad_norm = 1.0;
      e.episodes = 200;
      e.solve_threshold = -20.0;
      e.window = 10;
      break;
    case EnvKind::kPendulum:
      e.policy.hidden = {};
      e.policy.sigma = {0.3};
      e.policy_lr = 0.03;
      e.episodes = 400;
      e.solve_threshold = 150.0;
      e.window = 20;
      break;
  }
}

}  // namespace

std::vector<std::size_t> ParseSizeList(const std::string& text) {
  std::vector<std::size_t> out;
  for (const auto& item : Split(text, ',')) {
    if (!item.empty()) out.push_back(ToUnsigned(item));
  }
  return out;
}

std::vector<double> ParseDoubleList(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : Split(text, ',')) {
    if (!item.empty()) out.push_back(ToDouble(item));
  }
  return out;
}

EstimatorChoice ParseEstimatorChoice(const std::string& text) {
  const std::string t = Trim(text);
  const auto colon = t.find(':');
  EstimatorChoice choice;
  choice.kind = EstimatorKindFromString(Trim(t.substr(0, colon)));
  if (choice.kind == EstimatorKind::kReinforce) {
    if (colon != std::string::npos) throw ArgumentError("reinforce takes no resolution");
    return choice;
  }
  if (colon == std::string::npos) {
    throw ArgumentError("estimator '" + t + "' needs a resolution, e.g. mc:64");
  }
  choice.n = ToUnsigned(t.substr(colon + 1));
  return choice;
}

std::vector<std::uint64_t> SeedList(std::uint64_t seed, std::size_t num_seeds) {
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < num_seeds; ++i) seeds.push_back(seed + i);
  return seeds;
}

Config ParseConfig(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ArgumentError(fmt::format("{}: {}", origin, e.message()));
  }

  Config config;
  config.path = origin;
  config.text = text;
  EnvKind kind = EnvKind::kBandit;
  if (const auto env = tree.get_child_optional("env")) {
    if (const auto k = env->get_optional<std::string>("kind")) kind = EnvKindFromString(Trim(*k));
  }
  ApplyKindDefaults(config, kind);

  const auto& registry = Registry();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ArgumentError(fmt::format("{}: key '{}' must be inside a section", origin, section));
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = registry.find(name);
      if (it == registry.end()) {
        throw ArgumentError(fmt::format("{}: unknown config key '{}'", origin, name));
      }
      if (!it->second.set) continue;
      try {
        it->second.set(config, value.data());
      } catch (const std::exception& e) {
        throw ArgumentError(fmt::format("{}: {}: {}", origin, name, e.what()));
      }
    }
  }
  config.experiment.seeds = SeedList(config.seed, config.num_seeds);
  try {
    config.experiment.Validate();
  } catch (const std::exception& e) {
    throw ArgumentError(fmt::format("{}: {}", origin, e.what()));
  }
  return config;
}

Config LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open config file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseConfig(buffer.str(), path);
}

std::string ConfigKeyHelp() {
  std::string out = "Config keys (INI, section.key):\n";
  for (const auto& [name, key] : Registry()) {
    out += fmt::format("  {:<28} {}\n", name, key.help);
  }
  return out;
}

}  // namespace allact::cli
