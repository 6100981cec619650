// fabimit: collect | train | record-demo | imitate | evaluate | ablate | report

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fabimit/experiment.hpp"

using namespace fabimit;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ScenarioKind> selected(const ExperimentConfig& cfg, const std::string& only) {
  if (only.empty()) return cfg.scenarios;
  const ScenarioKind k = scenario_from_string(only);
  if (k == ScenarioKind::kContactFree) throw ConfigError("--scenario must name an object scene");
  return {k};
}

TransitionDataset load_dataset_checked(const ExperimentConfig& cfg) {
  require_file(cfg.paths.dataset(), "dataset (run `collect` first)");
  return load_dataset(cfg.paths.dataset());
}

PriorModels load_models_checked(const ExperimentConfig& cfg) {
  for (const char* f : {"forward.net", "inverse.net", "registration.net"}) {
    require_file(cfg.paths.models() / f, "model file (run `train` first)");
  }
  return PriorModels::load(cfg.paths.models());
}

Demonstration load_demo_checked(const ExperimentConfig& cfg, ScenarioKind k) {
  require_file(cfg.paths.demo(k), "demonstration (run `record-demo` first)");
  Demonstration d = load_demonstration(cfg.paths.demo(k));
  if (d.scenario != k) throw FormatError(cfg.paths.demo(k).string() + " records a " + to_string(d.scenario) + " task");
  if (d.keypoints() != cfg.layout.count()) throw FormatError("demonstration keypoint count does not match config");
  return d;
}

// Every upstream artifact is checked before any work starts.
void preflight(const ExperimentConfig& cfg, const std::vector<ScenarioKind>& kinds) {
  require_file(cfg.paths.dataset(), "dataset (run `collect` first)");
  for (const char* f : {"forward.net", "inverse.net", "registration.net"}) {
    require_file(cfg.paths.models() / f, "model file (run `train` first)");
  }
  for (auto k : kinds) require_file(cfg.paths.demo(k), "demonstration (run `record-demo` first)");
}

void cmd_collect(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const TransitionDataset ds = collect_dataset(cfg.collect_config());
  save_dataset(ds, cfg.paths.dataset());
  std::printf("collected %zu transitions -> %s (%.1f s)\n", ds.size(), cfg.paths.dataset().c_str(), seconds_since(t0));
}

void cmd_train(const ExperimentConfig& cfg) {
  const TransitionDataset ds = load_dataset_checked(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const TrainedPriors tp = train_priors(ds, cfg.prior_train_config());
  tp.models.save(cfg.paths.models());
  atomic_write(cfg.paths.models() / "loss.csv",
               [&](std::ostream& os) { write_loss_csv(os, tp.reports, cfg.hash(), cfg.train.train.seed); });
  for (const auto& [name, rep] : tp.reports) {
    std::printf("%-13s val loss %.6g after %zu epochs\n", name.c_str(), rep.val_loss.back(), rep.val_loss.size());
  }
  std::printf("models -> %s (%.1f s)\n", cfg.paths.models().c_str(), seconds_since(t0));
}

void cmd_record(const ExperimentConfig& cfg, const std::string& only) {
  for (auto k : selected(cfg, only)) {
    const RecordedDemo rec = record_default_demo(cfg, k);
    save_demonstration(rec.demo, cfg.paths.demo(k));
    std::printf("%s demonstration: %d states -> %s\n", to_string(k).c_str(), rec.demo.length(),
                cfg.paths.demo(k).c_str());
  }
}

void cmd_imitate(const ExperimentConfig& cfg, const std::string& only, const std::string& mode_name, int trial) {
  const auto kinds = selected(cfg, only);
  preflight(cfg, kinds);
  const PlannerMode mode = planner_from_string(mode_name);
  if (mode == PlannerMode::kOracle) throw ConfigError("--mode oracle is internal to testing");
  if (trial < 0 || trial >= cfg.trials) throw ConfigError("--trial must lie in [0, trials)");
  const TransitionDataset ds = load_dataset_checked(cfg);
  const PriorModels generic = load_models_checked(cfg);
  for (auto k : kinds) {
    const Demonstration demo = load_demo_checked(cfg, k);
    const PriorModels models = specialise_priors(generic, ds, demo, cfg.prior_train_config());
    const EpisodeResult r = run_trial(cfg, k, mode, trial, models, demo);
    const TraceInfo info{to_string(k), trial, cfg.trial_seed(trial), cfg.hash()};
    const std::string stem = "imitate_" + to_string(k) + "_" + to_string(mode) + "_" + std::to_string(trial);
    atomic_write(cfg.paths.results() / (stem + ".ndjson"), [&](std::ostream& os) { write_trace(os, r, info); });
    atomic_write(cfg.paths.results() / (stem + "_telemetry.csv"),
                 [&](std::ostream& os) { write_telemetry_csv(os, r, info); });
    std::printf("%s %s trial %d: %s after %d steps, success %s, IoU %.3f, Chamfer %.3g -> %.3g\n",
                to_string(k).c_str(), to_string(mode).c_str(), trial, to_string(r.reason).c_str(), r.steps,
                r.success ? "yes" : "no", r.final_iou, r.initial_chamfer, r.final_chamfer);
  }
}

void cmd_run(const ExperimentConfig& cfg, const std::string& only, const std::vector<PlannerMode>& modes,
             const std::string& name, bool verbose) {
  const auto kinds = selected(cfg, only);
  preflight(cfg, kinds);
  const TransitionDataset ds = load_dataset_checked(cfg);
  const PriorModels generic = load_models_checked(cfg);
  TrialSet all;
  for (auto k : kinds) {
    const Demonstration demo = load_demo_checked(cfg, k);
    const PriorModels models = specialise_priors(generic, ds, demo, cfg.prior_train_config());
    for (auto mode : modes) {
      const auto t0 = std::chrono::steady_clock::now();
      run_trials(cfg, k, mode, models, demo, all, [&](const TrialRow& row) {
        if (verbose) {
          std::printf("  %s %s trial %d: %s, %d steps, success %d\n", row.scenario.c_str(), row.mode.c_str(),
                      row.trial, row.reason.c_str(), row.steps, row.success ? 1 : 0);
        }
      });
      std::fprintf(stderr, "%s/%s done (%.1f s)\n", to_string(k).c_str(), to_string(mode).c_str(),
                   seconds_since(t0));
    }
  }
  write_run_outputs(cfg.paths.results(), name, all);
  std::cout << format_table(all.summary);
  std::printf("outputs -> %s/%s_*\n", cfg.paths.results().c_str(), name.c_str());
}

void cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  RunSummary merged;
  for (const auto& in : inputs) {
    require_file(in, "trial table");
    std::ifstream is(in);
    RunSummary s = read_trials_csv(is);
    if (merged.rows.empty()) {
      merged.config_hash = s.config_hash;
      merged.master_seed = s.master_seed;
    }
    merged.rows.insert(merged.rows.end(), s.rows.begin(), s.rows.end());
  }
  std::cout << format_table(merged);
  if (!out.empty()) {
    atomic_write(out, [&](std::ostream& os) { write_aggregate_csv(os, merged); });
    std::printf("aggregates -> %s\n", out.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fabric imitation with learned priors and constrained sampling MPC"};
  app.require_subcommand(1);
  std::string config_path;
  std::string scenario, mode = "full", eval_name, ablate_name;
  int trial = 0;
  bool verbose = false;
  std::vector<std::string> inputs;
  std::string out;

  auto add_config = [&](CLI::App* c) { c->add_option("-c,--config", config_path, "config file")->required(); };
  auto* collect = app.add_subcommand("collect", "collect contact-free transitions");
  add_config(collect);
  auto* train = app.add_subcommand("train", "train forward, inverse and registration models");
  add_config(train);
  auto* record = app.add_subcommand("record-demo", "record scripted demonstrations");
  add_config(record);
  record->add_option("-s,--scenario", scenario, "box or hanger (default: all configured)");
  auto* imitate = app.add_subcommand("imitate", "run one episode and write its trace");
  add_config(imitate);
  imitate->add_option("-s,--scenario", scenario, "box or hanger (default: all configured)");
  imitate->add_option("-m,--mode", mode, "full, no-mpc, no-prior or no-cost");
  imitate->add_option("-t,--trial", trial, "trial index (selects the seed)");
  auto* evaluate = app.add_subcommand("evaluate", "run all trials with the full method");
  add_config(evaluate);
  evaluate->add_option("-s,--scenario", scenario, "box or hanger (default: all configured)");
  evaluate->add_option("-n,--name", eval_name, "output name prefix")->default_val("evaluate");
  evaluate->add_flag("-v,--verbose", verbose, "print every trial");
  auto* ablate = app.add_subcommand("ablate", "run all trials for the full method and each ablation");
  add_config(ablate);
  ablate->add_option("-s,--scenario", scenario, "box or hanger (default: all configured)");
  ablate->add_option("-n,--name", ablate_name, "output name prefix")->default_val("ablate");
  ablate->add_flag("-v,--verbose", verbose, "print every trial");
  auto* report = app.add_subcommand("report", "aggregate trial tables from several runs");
  report->add_option("inputs", inputs, "*_trials.csv files")->required();
  report->add_option("-o,--out", out, "aggregate CSV to write");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kConfig);
  }

  try {
    if (report->parsed()) {
      cmd_report(inputs, out);
      return 0;
    }
    const ExperimentConfig cfg = load_config(config_path);
    if (collect->parsed()) cmd_collect(cfg);
    if (train->parsed()) cmd_train(cfg);
    if (record->parsed()) cmd_record(cfg, scenario);
    if (imitate->parsed()) cmd_imitate(cfg, scenario, mode, trial);
    if (evaluate->parsed()) cmd_run(cfg, scenario, {PlannerMode::kFull}, eval_name, verbose);
    if (ablate->parsed()) {
      cmd_run(cfg, scenario, {PlannerMode::kFull, PlannerMode::kNoMpc, PlannerMode::kNoPrior, PlannerMode::kNoCost},
              ablate_name, verbose);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "fabimit: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fabimit: %s\n", e.what());
    return static_cast<int>(ExitCode::kRuntime);
  }
  return 0;
}
