#pragma once

// Sectioned key = value configuration (a TOML subset) covering every module.
//
//   # comment
//   [section]
//   key = 1.5
//   key = "text"          (quotes optional for bare words)
//   key = [a, b, c]       (or a, b, c)
//   seeds = 1..50         (inclusive integer range)
//
// Unknown sections or keys are rejected so that typos cannot silently fall
// back to defaults.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fabimit/action_constraints.hpp"
#include "fabimit/demo_reward.hpp"
#include "fabimit/errors.hpp"
#include "fabimit/fabric_sim.hpp"
#include "fabimit/mpc_controller.hpp"
#include "fabimit/priors.hpp"
#include "fabimit/random.hpp"
#include "fabimit/scenarios.hpp"
#include "fabimit/state_space.hpp"

namespace fabimit {

using ConfigTable = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline std::string unquote(const std::string& v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
  return v;
}

}  // namespace detail

inline ConfigTable parse_config_table(std::string_view text) {
  ConfigTable t;
  std::string section;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    const std::string where = "config line " + std::to_string(lineno) + ": ";
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + "unterminated section header");
      section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(where + "empty section name");
      t[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    const std::string key = detail::trim(std::string_view(s).substr(0, eq));
    const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "empty key");
    if (t[section].count(key)) throw ConfigError(where + "duplicate key " + section + "." + key);
    t[section][key] = value;
  }
  return t;
}

// Typed reader over one table; records which keys were consumed.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigTable& t) : t_(t) {}

  template <class T>
  void get(const std::string& section, const std::string& key, T& out) {
    const std::string* v = find(section, key);
    if (!v) return;
    out = convert<T>(section + "." + key, detail::unquote(*v));
  }

  void get_list(const std::string& section, const std::string& key, std::vector<std::string>& out) {
    const std::string* v = find(section, key);
    if (!v) return;
    std::string s = *v;
    if (!s.empty() && s.front() == '[') {
      if (s.back() != ']') throw ConfigError(section + "." + key + ": unterminated list");
      s = s.substr(1, s.size() - 2);
    }
    out.clear();
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, ',')) {
      item = detail::unquote(detail::trim(item));
      if (!item.empty()) out.push_back(item);
    }
  }

  // Every key present in the file must have been read.
  void reject_unknown() const {
    for (const auto& [sec, kv] : t_) {
      for (const auto& [k, v] : kv) {
        if (!used_.count(sec + "." + k)) throw ConfigError("unknown config key " + sec + "." + k);
      }
    }
  }

  template <class T>
  static T convert(const std::string& name, const std::string& v) {
    if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (v == "true") return true;
      if (v == "false") return false;
      throw ConfigError(name + ": expected true or false, got '" + v + "'");
    } else {
      T out{};
      const char* b = v.data();
      const char* e = v.data() + v.size();
      const auto r = std::from_chars(b, e, out);
      if (r.ec != std::errc() || r.ptr != e) throw ConfigError(name + ": cannot parse '" + v + "'");
      return out;
    }
  }

 private:
  const std::string* find(const std::string& section, const std::string& key) {
    const auto s = t_.find(section);
    if (s == t_.end()) return nullptr;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used_.insert(section + "." + key);
    return &k->second;
  }

  const ConfigTable& t_;
  std::set<std::string> used_;
};

inline std::vector<std::uint64_t> parse_seed_list(const std::vector<std::string>& items) {
  std::vector<std::uint64_t> seeds;
  for (const auto& it : items) {
    const auto dots = it.find("..");
    if (dots == std::string::npos) {
      seeds.push_back(ConfigReader::convert<std::uint64_t>("experiment.seeds", it));
      continue;
    }
    const auto lo = ConfigReader::convert<std::uint64_t>("experiment.seeds", detail::trim(it.substr(0, dots)));
    const auto hi = ConfigReader::convert<std::uint64_t>("experiment.seeds", detail::trim(it.substr(dots + 2)));
    if (hi < lo || hi - lo > 1000000) throw ConfigError("experiment.seeds: bad range '" + it + "'");
    for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  return seeds;
}

struct CollectSettings {
  int count = 10000;
  int horizon = 30;
  double yaw_range = 0.3;
  std::uint64_t seed = 1;
};

struct PathSettings {
  std::filesystem::path root = "run";

  std::filesystem::path dataset() const { return root / "dataset.bin"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path demo(ScenarioKind k) const { return root / "demos" / (to_string(k) + ".demo"); }
  std::filesystem::path results() const { return root / "results"; }
};

struct ExperimentConfig {
  SimConfig sim;
  int rows = 16;
  int cols = 16;
  double edge_length = 0.3;
  KeypointLayout layout;
  ConstraintConfig constraints;
  CollectSettings collect;
  PriorTrainConfig train;
  RewardConfig reward;
  ControlConfig control;
  std::vector<ScenarioKind> scenarios{ScenarioKind::kBox, ScenarioKind::kHanger};
  int trials = 50;
  std::vector<std::uint64_t> seeds;  // per-trial seeds; derived from master_seed when empty
  std::uint64_t master_seed = 99;
  double translation_x = 0.04;  // object translation drawn from [-x, x] per trial
  double translation_y = 0.03;
  double yaw = 0.0;             // object yaw drawn from [-yaw, yaw]
  PathSettings paths;

  std::uint64_t trial_seed(int i) const {
    return seeds.empty() ? derive_seed(master_seed, static_cast<std::uint64_t>(i)) : seeds[static_cast<std::size_t>(i)];
  }

  ScenarioSpec scenario_spec(ScenarioKind k) const;

  void validate() const {
    sim.validate();
    constraints.validate();
    reward.validate();
    control.validate();
    train.train.validate();
    if (rows < 2 || cols < 2 || !(edge_length > 0)) throw ConfigError("sim: bad fabric grid");
    if (collect.count <= 0 || collect.horizon <= 0) throw ConfigError("collect: count and horizon must be positive");
    if (trials <= 0) throw ConfigError("experiment: trials must be positive");
    if (!seeds.empty() && static_cast<int>(seeds.size()) != trials) {
      throw ConfigError("experiment: seed list has " + std::to_string(seeds.size()) + " entries but trials = " +
                        std::to_string(trials));
    }
    if (translation_x < 0 || translation_y < 0 || yaw < 0) throw ConfigError("experiment: ranges must be >= 0");
    if (scenarios.empty()) throw ConfigError("experiment: no scenarios");
    for (auto k : scenarios) {
      if (k == ScenarioKind::kContactFree) throw ConfigError("experiment: contact-free is not an imitation task");
    }
  }

  // Canonical listing of every effective value; the config hash is taken
  // over this text so formatting and defaults do not matter.
  std::string dump() const {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "[sim]\n";
    os << "substeps = " << sim.substeps_per_action << "\ndt = " << sim.dt << "\ngravity = " << sim.gravity
       << "\nfabric_mass = " << sim.fabric_mass << "\nk_structural = " << sim.k_structural
       << "\nk_shear = " << sim.k_shear << "\nk_bend = " << sim.k_bend << "\nspring_damping = " << sim.spring_damping
       << "\ndamping = " << sim.damping << "\nfriction = " << sim.friction << "\nmax_strain = " << sim.max_strain
       << "\nstrain_iterations = " << sim.strain_iterations << "\ncontact_margin = " << sim.contact_margin
       << "\npenetration_tolerance = " << sim.penetration_tolerance << "\nsettle_steps = " << sim.settle_steps
       << "\nrest_kinetic_energy = " << sim.rest_kinetic_energy << "\ncover_fraction = " << sim.cover_fraction
       << "\nrows = " << rows << "\ncols = " << cols << "\nedge_length = " << edge_length
       << "\nedge_midpoints = " << (layout.edge_midpoints ? "true" : "false") << "\n";
    os << "[constraints]\ntau_close = " << constraints.tau_close << "\ntau_far = " << constraints.tau_far
       << "\ntau_direction = " << constraints.tau_direction << "\na_max = " << constraints.a_max
       << "\nclearance = " << constraints.clearance << "\nmax_attempts = " << constraints.max_attempts << "\n";
    os << "[collect]\ncount = " << collect.count << "\nhorizon = " << collect.horizon
       << "\nyaw_range = " << collect.yaw_range << "\nseed = " << collect.seed << "\n";
    os << "[train]\nepochs = " << train.train.epochs << "\nbatch_size = " << train.train.batch_size
       << "\nlearning_rate = " << train.train.learning_rate << "\nvalidation_fraction = "
       << train.train.validation_fraction << "\nhidden = " << train.hidden << "\ndepth = " << train.depth
       << "\nseed = " << train.train.seed << "\nregistration_pairs = " << train.pairs.count << "\n";
    os << "[reward]\nw_r = " << reward.w_r << "\nw_p = " << reward.w_p << "\nw_n = " << reward.w_n
       << "\ntau_i = " << reward.tau_i << "\nregistration = " << (reward.kabsch_oracle ? "kabsch" : "learned") << "\n";
    os << "[control]\nh = " << control.h << "\nH = " << control.H << "\nn_samples = " << control.n_samples
       << "\nelite_count = " << control.elites() << "\nbeta = " << control.beta << "\ngamma = " << control.gamma
       << "\nsigma_init = " << control.sigma_init << "\ntau_conv = " << control.tau_conv
       << "\nmax_iterations = " << control.max_iterations << "\n";
    os << "[experiment]\nscenarios = [";
    for (std::size_t i = 0; i < scenarios.size(); ++i) os << (i ? ", " : "") << to_string(scenarios[i]);
    os << "]\ntrials = " << trials << "\nmaster_seed = " << master_seed << "\nseeds = [";
    for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? ", " : "") << seeds[i];
    os << "]\ntranslation_x = " << translation_x << "\ntranslation_y = " << translation_y << "\nyaw = " << yaw << "\n";
    return os.str();
  }

  std::uint64_t hash() const {
    const std::string d = dump();
    Fnv1a h;
    h.update(d.data(), d.size());
    return h.digest();
  }

  SimConfig sim_config() const { return sim; }

  CollectConfig collect_config() const {
    CollectConfig c;
    c.count = collect.count;
    c.horizon = collect.horizon;
    c.yaw_range = collect.yaw_range;
    c.scenario = scenario_spec(ScenarioKind::kContactFree);
    c.sim = sim_config();
    c.constraints = constraints;
    c.layout = layout;
    c.seed = collect.seed;
    c.config_hash = hash();
    return c;
  }

  PriorTrainConfig prior_train_config() const {
    PriorTrainConfig p = train;
    p.config_hash = hash();
    return p;
  }

  EpisodeConfig episode_config() const {
    EpisodeConfig e;
    e.sim = sim_config();
    e.constraints = constraints;
    e.control = control;
    e.reward = reward;
    e.layout = layout;
    return e;
  }
};

inline ScenarioSpec ExperimentConfig::scenario_spec(ScenarioKind k) const {
  ScenarioSpec s = default_scenario(k);
  s.rows = rows;
  s.cols = cols;
  s.edge_length = edge_length;
  s.workspace = constraints.workspace;
  return s;
}

inline ExperimentConfig parse_config(std::string_view text) {
  const ConfigTable t = parse_config_table(text);
  static const std::set<std::string> sections{"sim", "constraints", "collect", "train", "reward", "control",
                                              "experiment", "paths"};
  for (const auto& [s, kv] : t) {
    if (!sections.count(s)) throw ConfigError("unknown config section [" + s + "]");
  }
  ConfigReader r(t);
  ExperimentConfig c;
  SimConfig& sim = c.sim;
  r.get("sim", "substeps", sim.substeps_per_action);
  r.get("sim", "dt", sim.dt);
  r.get("sim", "gravity", sim.gravity);
  r.get("sim", "fabric_mass", sim.fabric_mass);
  r.get("sim", "k_structural", sim.k_structural);
  r.get("sim", "k_shear", sim.k_shear);
  r.get("sim", "k_bend", sim.k_bend);
  r.get("sim", "spring_damping", sim.spring_damping);
  r.get("sim", "damping", sim.damping);
  r.get("sim", "friction", sim.friction);
  r.get("sim", "max_strain", sim.max_strain);
  r.get("sim", "strain_iterations", sim.strain_iterations);
  r.get("sim", "contact_margin", sim.contact_margin);
  r.get("sim", "penetration_tolerance", sim.penetration_tolerance);
  r.get("sim", "settle_steps", sim.settle_steps);
  r.get("sim", "rest_kinetic_energy", sim.rest_kinetic_energy);
  r.get("sim", "cover_fraction", sim.cover_fraction);
  r.get("sim", "rows", c.rows);
  r.get("sim", "cols", c.cols);
  r.get("sim", "edge_length", c.edge_length);
  r.get("sim", "edge_midpoints", c.layout.edge_midpoints);

  ConstraintConfig& cc = c.constraints;
  r.get("constraints", "tau_close", cc.tau_close);
  r.get("constraints", "tau_far", cc.tau_far);
  r.get("constraints", "tau_direction", cc.tau_direction);
  r.get("constraints", "a_max", cc.a_max);
  r.get("constraints", "clearance", cc.clearance);
  r.get("constraints", "max_attempts", cc.max_attempts);
  cc.edge_length = c.edge_length;

  r.get("collect", "count", c.collect.count);
  r.get("collect", "horizon", c.collect.horizon);
  r.get("collect", "yaw_range", c.collect.yaw_range);
  r.get("collect", "seed", c.collect.seed);

  TrainConfig& tc = c.train.train;
  tc.seed = 3;
  r.get("train", "epochs", tc.epochs);
  r.get("train", "batch_size", tc.batch_size);
  r.get("train", "learning_rate", tc.learning_rate);
  r.get("train", "validation_fraction", tc.validation_fraction);
  r.get("train", "seed", tc.seed);
  r.get("train", "hidden", c.train.hidden);
  r.get("train", "depth", c.train.depth);
  r.get("train", "registration_pairs", c.train.pairs.count);

  r.get("reward", "w_r", c.reward.w_r);
  r.get("reward", "w_p", c.reward.w_p);
  r.get("reward", "w_n", c.reward.w_n);
  r.get("reward", "tau_i", c.reward.tau_i);
  std::string reg = "learned";
  r.get("reward", "registration", reg);
  if (reg != "learned" && reg != "kabsch") throw ConfigError("reward.registration must be learned or kabsch");
  c.reward.kabsch_oracle = reg == "kabsch";

  ControlConfig& k = c.control;
  r.get("control", "h", k.h);
  r.get("control", "H", k.H);
  r.get("control", "n_samples", k.n_samples);
  r.get("control", "elite_count", k.elite_count);
  r.get("control", "beta", k.beta);
  r.get("control", "gamma", k.gamma);
  r.get("control", "sigma_init", k.sigma_init);
  r.get("control", "tau_conv", k.tau_conv);
  r.get("control", "max_iterations", k.max_iterations);

  std::vector<std::string> kinds;
  r.get_list("experiment", "scenarios", kinds);
  if (!kinds.empty()) {
    c.scenarios.clear();
    for (const auto& s : kinds) c.scenarios.push_back(scenario_from_string(s));
  }
  r.get("experiment", "trials", c.trials);
  std::vector<std::string> seeds;
  r.get_list("experiment", "seeds", seeds);
  c.seeds = parse_seed_list(seeds);
  r.get("experiment", "master_seed", c.master_seed);
  r.get("experiment", "translation_x", c.translation_x);
  r.get("experiment", "translation_y", c.translation_y);
  r.get("experiment", "yaw", c.yaw);

  std::string root = c.paths.root.string();
  r.get("paths", "root", root);
  c.paths.root = root;

  r.reject_unknown();
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

}  // namespace fabimit
