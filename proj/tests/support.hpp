#pragma once

// Shared fixtures: a small trained prior set (cached on disk between test
// processes) and the recorded demonstrations.

#include <filesystem>

#include "fabimit/experiment.hpp"

namespace fabimit::fixtures {

inline std::filesystem::path cache_dir() { return FABIMIT_TEST_CACHE; }

struct SmallPriors {
  TransitionDataset dataset;
  PriorModels models;
};

inline PriorTrainConfig small_train_config() {
  PriorTrainConfig c;
  c.train.epochs = 8;
  c.train.seed = 5;
  c.hidden = 64;
  c.pairs.count = 4000;
  return c;
}

inline const SmallPriors& small_priors() {
  static const SmallPriors p = [] {
    SmallPriors out;
    const auto ds_path = cache_dir() / "small_dataset.bin";
    const auto model_dir = cache_dir() / "small_models";
    if (std::filesystem::exists(ds_path)) {
      out.dataset = load_dataset(ds_path);
    } else {
      CollectConfig c;
      c.count = 1000;
      c.seed = 11;
      out.dataset = collect_dataset(c);
      save_dataset(out.dataset, ds_path);
    }
    if (std::filesystem::exists(model_dir / "registration.net")) {
      out.models = PriorModels::load(model_dir);
    } else {
      out.models = train_priors(out.dataset, small_train_config()).models;
      out.models.save(model_dir);
    }
    return out;
  }();
  return p;
}

inline const RecordedDemo& demo_for(ScenarioKind k) {
  static const RecordedDemo box = [] {
    const ScenarioSpec s = default_scenario(ScenarioKind::kBox);
    return record_demonstration(default_demo_script(s), s, SimConfig{}, ConstraintConfig{}.a_max);
  }();
  static const RecordedDemo hanger = [] {
    const ScenarioSpec s = default_scenario(ScenarioKind::kHanger);
    return record_demonstration(default_demo_script(s), s, SimConfig{}, ConstraintConfig{}.a_max);
  }();
  return k == ScenarioKind::kBox ? box : hanger;
}

// Small priors with registration fine-tuned on the box demonstration.
inline const PriorModels& box_models() {
  static const PriorModels m = [] {
    const auto dir = cache_dir() / "box_models";
    if (std::filesystem::exists(dir / "registration.net")) return PriorModels::load(dir);
    const SmallPriors& p = small_priors();
    PriorModels out = specialise_priors(p.models, p.dataset, demo_for(ScenarioKind::kBox).demo, small_train_config());
    out.save(dir);
    return out;
  }();
  return m;
}

inline KeypointState shifted(KeypointState s, const Vec3& d) {
  for (auto& p : s.points) p += d;
  return s;
}

}  // namespace fabimit::fixtures
