#pragma once

// Pipeline stages shared by the command-line tool and the acceptance run:
// collect, train, record demonstrations, fine-tune registration per
// demonstration and run seeded trials.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fabimit/config.hpp"
#include "fabimit/io.hpp"
#include "fabimit/mpc_controller.hpp"
#include "fabimit/priors.hpp"
#include "fabimit/scenarios.hpp"

namespace fabimit {

// Fine-tuning passes over demonstration-targeted registration pairs.
inline constexpr int kRegistrationFinetuneEpochs = 20;

struct TrainedPriors {
  PriorModels models;
  std::map<std::string, TrainReport> reports;
};

inline TrainedPriors train_priors(const TransitionDataset& ds, const PriorTrainConfig& cfg) {
  TrainedPriors out;
  out.reports["forward"] = train_forward(out.models.forward, ds, cfg);
  out.reports["inverse"] = train_inverse(out.models.inverse, ds, cfg);
  out.reports["registration"] = train_registration(out.models.registration, ds, {}, cfg);
  return out;
}

// Copy of `generic` whose registration model is adapted to the demonstration.
inline PriorModels specialise_priors(const PriorModels& generic, const TransitionDataset& ds, const Demonstration& demo,
                                     const PriorTrainConfig& cfg) {
  PriorModels m = generic;
  PriorTrainConfig c = cfg;
  c.train.epochs = kRegistrationFinetuneEpochs;
  train_registration(m.registration, ds, demo.states, c, true);
  return m;
}

inline RecordedDemo record_default_demo(const ExperimentConfig& cfg, ScenarioKind kind) {
  const ScenarioSpec spec = cfg.scenario_spec(kind);
  RecordedDemo rec = record_demonstration(default_demo_script(spec), spec, cfg.sim_config(), cfg.constraints.a_max,
                                          cfg.layout);
  rec.demo.config_hash = cfg.hash();
  return rec;
}

// Object pose of one trial: uniform translation (and yaw) about the default.
inline ScenarioSpec trial_scenario(const ExperimentConfig& cfg, ScenarioKind kind, std::uint64_t trial_seed) {
  ScenarioSpec s = cfg.scenario_spec(kind);
  Rng rng(trial_seed);
  s.object_pose.position.x() += uniform(rng, -cfg.translation_x, cfg.translation_x);
  s.object_pose.position.y() += uniform(rng, -cfg.translation_y, cfg.translation_y);
  if (cfg.yaw > 0) s.object_pose.yaw += uniform(rng, -cfg.yaw, cfg.yaw);
  return s;
}

struct TrialSet {
  RunSummary summary;
  std::vector<EpisodeResult> results;
};

inline EpisodeResult run_trial(const ExperimentConfig& cfg, ScenarioKind kind, PlannerMode mode, int trial,
                               const PriorModels& models, const Demonstration& demo,
                               const std::vector<BimanualAction>* oracle = nullptr) {
  const std::uint64_t seed = cfg.trial_seed(trial);
  const ScenarioSpec spec = trial_scenario(cfg, kind, seed);
  return run_episode(init_scenario(spec), demo, models, cfg.episode_config(), mode, derive_seed(seed, 1), oracle);
}

// Trials are independent; each one depends only on its own seed.
template <class Progress>
void run_trials(const ExperimentConfig& cfg, ScenarioKind kind, PlannerMode mode, const PriorModels& models,
                const Demonstration& demo, TrialSet& out, Progress&& progress) {
  out.summary.config_hash = cfg.hash();
  out.summary.master_seed = cfg.master_seed;
  for (int i = 0; i < cfg.trials; ++i) {
    EpisodeResult r = run_trial(cfg, kind, mode, i, models, demo);
    out.summary.rows.push_back(TrialRow::from(r, to_string(kind), i, cfg.trial_seed(i)));
    progress(out.summary.rows.back());
    out.results.push_back(std::move(r));
  }
}

// Writes <dir>/<name>_{trials,summary,timing,chamfer}.csv and <name>_table.txt.
inline void write_run_outputs(const std::filesystem::path& dir, const std::string& name, const TrialSet& set) {
  atomic_write(dir / (name + "_trials.csv"), [&](std::ostream& os) { write_trials_csv(os, set.summary); });
  atomic_write(dir / (name + "_summary.csv"), [&](std::ostream& os) { write_aggregate_csv(os, set.summary); });
  atomic_write(dir / (name + "_table.txt"), [&](std::ostream& os) { os << format_table(set.summary); });
  atomic_write(dir / (name + "_timing.csv"), [&](std::ostream& os) { write_timing_csv(os, set.summary); });
  atomic_write(dir / (name + "_chamfer.csv"), [&](std::ostream& os) {
    write_chamfer_curves(os, set.results, set.summary.rows, set.summary.config_hash, set.summary.master_seed);
  });
}

}  // namespace fabimit
