#pragma once

// Observation-only demonstrations and the state-alignment reward: IoU
// progress estimation, subgoals, positive/negative distances and the
// termination classifier.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabimit/atomic_file.hpp"
#include "fabimit/errors.hpp"
#include "fabimit/fabric_sim.hpp"
#include "fabimit/priors.hpp"
#include "fabimit/registration.hpp"
#include "fabimit/state_space.hpp"
#include "fabimit/types.hpp"

namespace fabimit {

struct Demonstration {
  std::vector<KeypointState> states;
  ScenarioKind scenario = ScenarioKind::kContactFree;
  ObjectPose object_pose;
  PointCloud final_cloud;  // released, settled fabric at the end of the recording
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(states.size()); }
  int keypoints() const { return states.empty() ? 0 : states.front().size(); }
  const KeypointState& final_state() const { return states.back(); }

  void validate() const {
    if (states.size() < 2) throw FormatError("demonstration needs at least two states");
    for (const auto& s : states) {
      if (s.size() != keypoints()) throw FormatError("demonstration states disagree on keypoint count");
      if (!s.all_finite()) throw FormatError("demonstration contains non-finite keypoints");
    }
  }
};

// Anchor waypoints in the world frame; consecutive waypoints are joined by
// straight segments cut into macro actions no longer than a_max per axis.
struct AnchorScript {
  std::vector<std::array<Vec3, 2>> waypoints;
};

inline std::vector<BimanualAction> script_actions(const std::array<Vec3, 2>& start, const AnchorScript& script,
                                                  double a_max) {
  std::vector<BimanualAction> out;
  std::array<Vec3, 2> cur = start;
  for (const auto& wp : script.waypoints) {
    const Vec3 dl = wp[0] - cur[0];
    const Vec3 dr = wp[1] - cur[1];
    const double span = std::max(dl.cwiseAbs().maxCoeff(), dr.cwiseAbs().maxCoeff());
    const int n = std::max(1, static_cast<int>(std::ceil(span / a_max - 1e-9)));
    for (int k = 0; k < n; ++k) out.push_back({dl / n, dr / n});
    cur = wp;
  }
  return out;
}

struct RecordedDemo {
  Demonstration demo;
  std::vector<BimanualAction> actions;  // kept by the recorder only, never written to the demo file
  SimState final_released;
};

// Drives the anchors through the script, capturing object-frame keypoints
// before the first and after every macro step. The script must succeed.
inline RecordedDemo record_demonstration(const AnchorScript& script, const ScenarioSpec& spec, const SimConfig& sim,
                                         double a_max, const KeypointLayout& layout = {}, int cloud_points = 200) {
  if (script.waypoints.empty()) throw std::invalid_argument("record_demonstration: empty script");
  if (spec.kind == ScenarioKind::kContactFree) throw std::invalid_argument("record_demonstration: needs an object");
  RecordedDemo rec;
  SimState st = init_scenario(spec);
  rec.demo.scenario = spec.kind;
  rec.demo.object_pose = st.scene.object_pose;
  rec.demo.seed = sim.seed;
  rec.actions = script_actions(st.anchors, script, a_max);
  rec.demo.states.push_back(extract_keypoints(st, layout));
  for (const auto& a : rec.actions) {
    st = step(std::move(st), a, sim);
    rec.demo.states.push_back(extract_keypoints(st, layout));
  }
  rec.final_released = release_and_settle(std::move(st), sim);
  if (!check_success(rec.final_released, sim)) {
    throw Error("record_demonstration: scripted " + to_string(spec.kind) + " demonstration does not succeed");
  }
  rec.demo.final_cloud = sample_pointcloud(rec.final_released, cloud_points);
  return rec;
}

// ---------------------------------------------------------------------------
// Demonstration files (text)
//
//   fabimit-demo 1
//   scenario <contact-free|box|hanger>
//   object_pose <x> <y> <z> <yaw>
//   config_hash <hex>
//   seed <n>
//   T <steps> M <keypoints>
//   then T rows of 3M numbers: x y z per keypoint, keypoint order fixed
//   cloud <N>
//   then N rows "x y z" of the final released fabric

inline void write_demonstration(std::ostream& os, const Demonstration& d) {
  os << "fabimit-demo 1\n";
  os << "scenario " << to_string(d.scenario) << '\n';
  os << std::setprecision(17);
  const Vec3& p = d.object_pose.position;
  os << "object_pose " << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << d.object_pose.yaw << '\n';
  os << "config_hash " << std::hex << d.config_hash << std::dec << '\n';
  os << "seed " << d.seed << '\n';
  os << "T " << d.length() << " M " << d.keypoints() << '\n';
  for (const auto& s : d.states) {
    for (int i = 0; i < s.size(); ++i) {
      os << (i ? " " : "") << s[i].x() << ' ' << s[i].y() << ' ' << s[i].z();
    }
    os << '\n';
  }
  os << "cloud " << d.final_cloud.points.size() << '\n';
  for (const auto& p : d.final_cloud.points) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
}

inline Demonstration read_demonstration(std::istream& is) {
  auto expect = [&](const std::string& key) {
    std::string k;
    if (!(is >> k) || k != key) throw FormatError("demonstration file: expected '" + key + "'");
  };
  Demonstration d;
  int version = 0;
  expect("fabimit-demo");
  if (!(is >> version) || version != 1) throw FormatError("demonstration file: unsupported version");
  expect("scenario");
  std::string kind;
  is >> kind;
  try {
    d.scenario = scenario_from_string(kind);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("demonstration file: ") + e.what());
  }
  expect("object_pose");
  Vec3& p = d.object_pose.position;
  is >> p.x() >> p.y() >> p.z() >> d.object_pose.yaw;
  expect("config_hash");
  is >> std::hex >> d.config_hash >> std::dec;
  expect("seed");
  is >> d.seed;
  int t = 0, m = 0;
  expect("T");
  is >> t;
  expect("M");
  is >> m;
  if (!is || t < 2 || m < 3 || t > 100000 || m > 1024) throw FormatError("demonstration file: bad header");
  d.states.resize(static_cast<std::size_t>(t));
  for (auto& s : d.states) {
    s.points.resize(static_cast<std::size_t>(m));
    for (auto& q : s.points) is >> q.x() >> q.y() >> q.z();
  }
  if (!is) throw FormatError("demonstration file: truncated keypoint rows");
  expect("cloud");
  std::size_t n = 0;
  is >> n;
  if (!is || n > 1000000) throw FormatError("demonstration file: bad cloud header");
  d.final_cloud.points.resize(n);
  for (auto& q : d.final_cloud.points) is >> q.x() >> q.y() >> q.z();
  if (!is) throw FormatError("demonstration file: truncated cloud rows");
  std::string extra;
  if (is >> extra) throw FormatError("demonstration file: trailing content");
  d.validate();
  return d;
}

inline void save_demonstration(const Demonstration& d, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) { write_demonstration(os, d); }, false);
}

inline Demonstration load_demonstration(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ArtifactError("missing demonstration file " + path.string());
  return read_demonstration(is);
}

// ---------------------------------------------------------------------------

struct RewardConfig {
  double w_r = 0.1;  // m per rad
  double w_p = 2.0;
  double w_n = 5.0;
  double tau_i = 0.8;
  bool kabsch_oracle = false;  // register with Kabsch instead of the learned model

  void validate() const {
    if (!(w_r >= 0 && w_p >= 0 && w_n >= 0)) throw ConfigError("reward: weights must be non-negative");
    if (!(tau_i > 0 && tau_i < 1)) throw ConfigError("reward: tau_i must lie in (0,1)");
  }
};

struct ProgressEstimate {
  int j = 0;  // 0-based
  bool centroid_fallback = false;
  double iou = 0.0;
};

inline int subgoal_index(int j, int t) { return std::min(j + 1, t - 1); }

inline double kabsch_distance(const KeypointState& s, const KeypointState& target, double w_r) {
  const auto k = kabsch_align(s, target);
  return k.transform.translation.cwiseAbs().sum() + w_r * k.transform.euler().abs_sum();
}

// Reward evaluator bound to one demonstration; caches the demo footprints.
class AlignmentReward {
 public:
  AlignmentReward(const Demonstration& demo, const RewardConfig& cfg, const RegistrationModel* registration)
      : demo_(&demo), cfg_(cfg), registration_(registration) {
    demo.validate();
    cfg.validate();
    if (!registration_ && !cfg_.kabsch_oracle) throw std::invalid_argument("reward: no registration model");
    for (const auto& s : demo.states) {
      hulls_.push_back(footprint(s));
      areas_.push_back(hulls_.back().size() >= 3 ? polygon_area(hulls_.back()) : 0.0);
      centroids_.push_back(s.centroid());
    }
  }

  const Demonstration& demo() const { return *demo_; }
  const RewardConfig& config() const { return cfg_; }

  ProgressEstimate progress(const KeypointState& s) const {
    const auto hull = footprint(s);
    const double area = hull.size() >= 3 ? polygon_area(hull) : 0.0;
    ProgressEstimate best;
    best.iou = -1.0;
    for (int j = 0; j < demo_->length(); ++j) {
      double iou = 0.0;
      if (area > kDegenerateArea && areas_[j] > kDegenerateArea) {
        const double inter = convex_intersection_area(hull, hulls_[j]);
        iou = std::clamp(inter / (area + areas_[j] - inter), 0.0, 1.0);
      }
      if (iou >= best.iou) best = {j, false, iou};
    }
    if (best.iou > 0.0) return best;
    const Vec3 c = s.centroid();
    double dmin = std::numeric_limits<double>::infinity();
    for (int j = 0; j < demo_->length(); ++j) {
      const double d = (c - centroids_[j]).norm();
      if (d <= dmin) {
        dmin = d;
        best = {j, true, 0.0};
      }
    }
    return best;
  }

  const KeypointState& subgoal(const KeypointState& s) const {
    return demo_->states[subgoal_index(progress(s).j, demo_->length())];
  }

  double positive_distance(const KeypointState& s, int j) const {
    const KeypointState& target = demo_->states[subgoal_index(j, demo_->length())];
    if (cfg_.kabsch_oracle) return kabsch_distance(s, target, cfg_.w_r);
    return registration_->distance_batch(s.flat(), target.flat(), cfg_.w_r)[0];
  }

  double negative_distance(const KeypointState& s, int j) const {
    const int t = demo_->length();
    if (j <= t - 2) return 0.0;
    const double d_last = mean_keypoint_distance(s, demo_->states[t - 1]);
    const double d_prev = mean_keypoint_distance(s, demo_->states[t - 2]);
    return d_last < d_prev ? d_last : 0.0;
  }

  double reward(const KeypointState& s) const {
    const int j = progress(s).j;
    return (j + 1) - cfg_.w_p * positive_distance(s, j) - cfg_.w_n * negative_distance(s, j);
  }

  // Rewards for every column of `states` (3M x n); one registration pass.
  Eigen::VectorXd reward_batch(const Eigen::MatrixXd& states) const {
    const Eigen::Index n = states.cols();
    Eigen::VectorXd r(n);
    Eigen::MatrixXd targets(states.rows(), n);
    std::vector<int> js(static_cast<std::size_t>(n));
    std::vector<KeypointState> ss(static_cast<std::size_t>(n));
    for (Eigen::Index c = 0; c < n; ++c) {
      auto& s = ss[static_cast<std::size_t>(c)];
      s = KeypointState::from_flat(states.col(c));
      if (!s.all_finite()) {
        js[static_cast<std::size_t>(c)] = -1;
        targets.col(c) = demo_->states.front().flat();
        continue;
      }
      const int j = progress(s).j;
      js[static_cast<std::size_t>(c)] = j;
      targets.col(c) = demo_->states[subgoal_index(j, demo_->length())].flat();
    }
    Eigen::VectorXd dp(n);
    if (cfg_.kabsch_oracle) {
      for (Eigen::Index c = 0; c < n; ++c) {
        dp[c] = kabsch_distance(ss[static_cast<std::size_t>(c)], KeypointState::from_flat(targets.col(c)), cfg_.w_r);
      }
    } else {
      dp = registration_->distance_batch(states, targets, cfg_.w_r);
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      const int j = js[static_cast<std::size_t>(c)];
      if (j < 0 || !std::isfinite(dp[c])) {
        r[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      r[c] = (j + 1) - cfg_.w_p * dp[c] - cfg_.w_n * negative_distance(ss[static_cast<std::size_t>(c)], j);
    }
    return r;
  }

  bool terminated(const KeypointState& s) const {
    const int t = demo_->length();
    const auto p = progress(s);
    if (p.j != t - 1) return false;
    return polygon_iou(footprint(s), hulls_.back()).iou > cfg_.tau_i;
  }

 private:
  const Demonstration* demo_;
  RewardConfig cfg_;
  const RegistrationModel* registration_;
  std::vector<std::vector<Vec2>> hulls_;
  std::vector<double> areas_;
  std::vector<Vec3> centroids_;
};

// Free-function forms.

inline ProgressEstimate estimate_progress(const KeypointState& s, const Demonstration& demo) {
  RewardConfig cfg;
  cfg.kabsch_oracle = true;
  return AlignmentReward(demo, cfg, nullptr).progress(s);
}

inline const KeypointState& subgoal(const KeypointState& s, const Demonstration& demo) {
  return demo.states[subgoal_index(estimate_progress(s, demo).j, demo.length())];
}

inline double negative_distance(const KeypointState& s, const Demonstration& demo, int j) {
  RewardConfig cfg;
  cfg.kabsch_oracle = true;
  return AlignmentReward(demo, cfg, nullptr).negative_distance(s, j);
}

inline bool is_terminated(const KeypointState& s, const Demonstration& demo, const RewardConfig& cfg) {
  RewardConfig c = cfg;
  c.kabsch_oracle = true;
  return AlignmentReward(demo, c, nullptr).terminated(s);
}

}  // namespace fabimit
