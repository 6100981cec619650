#pragma once

// The valid action subset and the binary safety cost: gripper gap, action
// direction against the fabric edges, workspace containment and
// gripper-path clearance from the rigid object.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fabimit/errors.hpp"
#include "fabimit/fabric_sim.hpp"
#include "fabimit/random.hpp"
#include "fabimit/state_space.hpp"
#include "fabimit/types.hpp"

namespace fabimit {

struct ConstraintConfig {
  double tau_close = 0.5;
  double tau_far = 1.1;
  double tau_direction = kPi / 3.0;
  double edge_length = 0.3;  // rest length L of the grasped edge
  Aabb workspace{Vec3(-0.45, -0.55, 0.0), Vec3(0.45, 0.45, 0.45)};
  double a_max = 0.05;
  double clearance = 0.01;
  double min_action_norm = 1e-6;
  int max_attempts = 1000;

  void validate() const {
    if (!(tau_close > 0 && tau_close < 1 && tau_far >= 1)) throw ConfigError("constraints: need 0 < tau_close < 1 <= tau_far");
    if (!(tau_direction > 0 && tau_direction < kPi)) throw ConfigError("constraints: tau_direction must lie in (0, pi)");
    if (!(edge_length > 0) || !(a_max > 0) || !(clearance >= 0) || max_attempts <= 0) {
      throw ConfigError("constraints: edge_length, a_max, max_attempts must be positive");
    }
  }
};

enum class Rule : std::uint8_t { kDistance = 1, kDirection = 2, kWorkspace = 4, kCollision = 8 };

struct CostVerdict {
  int cost = 0;
  std::uint8_t violated = 0;

  bool has(Rule r) const { return (violated & static_cast<std::uint8_t>(r)) != 0; }
  bool feasible() const { return cost == 0; }
  void add(Rule r) {
    violated |= static_cast<std::uint8_t>(r);
    cost = 1;
  }

  std::string describe() const {
    std::string s;
    auto app = [&](Rule r, const char* name) {
      if (!has(r)) return;
      if (!s.empty()) s += '|';
      s += name;
    };
    app(Rule::kDistance, "distance");
    app(Rule::kDirection, "direction");
    app(Rule::kWorkspace, "workspace");
    app(Rule::kCollision, "collision");
    return s;
  }
};

inline bool check_distance(const KeypointState& s, const BimanualAction& a, const ConstraintConfig& cfg) {
  const double gap = ((s[0] + a.left) - (s[1] + a.right)).norm();
  return cfg.tau_close * cfg.edge_length < gap && gap < cfg.tau_far * cfg.edge_length;
}

inline bool check_direction(const KeypointState& s, const BimanualAction& a, const ConstraintConfig& cfg) {
  const Vec3 edge_left = s[0] - s[2];
  const Vec3 edge_right = s[1] - s[3];
  const double eps = cfg.min_action_norm;
  if (edge_left.norm() < eps || edge_right.norm() < eps) return false;
  auto arm_angle = [&](const Vec3& arm, const Vec3& edge) {
    return arm.norm() < eps ? 0.0 : angle_between(arm, edge);
  };
  return std::max(arm_angle(a.left, edge_left), arm_angle(a.right, edge_right)) < cfg.tau_direction;
}

// Closed workspace box; keypoints are in the object frame of `pose`.
inline bool check_workspace(const KeypointState& s_next, const ConstraintConfig& cfg, const ObjectPose& pose = {}) {
  for (const auto& p : s_next.points) {
    if (!cfg.workspace.contains(pose.to_world(p))) return false;
  }
  return true;
}

// Both straight-line gripper paths keep at least the configured clearance
// from the rigid object. Keypoints are in the object frame.
inline bool check_collision(const KeypointState& s, const BimanualAction& a, const RigidScene& scene,
                            const ConstraintConfig& cfg) {
  if (!scene.has_object()) return true;
  const double need = cfg.clearance - 1e-12;
  const std::array<std::pair<Vec3, Vec3>, 2> paths{{{s[0], s[0] + a.left}, {s[1], s[1] + a.right}}};
  for (const auto& [from, to] : paths) {
    double d = 0.0;
    if (scene.kind == ScenarioKind::kBox) {
      d = segment_aabb_distance(from, to, scene.box_local());
    } else {
      const double h = scene.bar_half_length();
      d = segment_segment_distance(from, to, Vec3(-h, 0, scene.bar_height()), Vec3(h, 0, scene.bar_height())) -
          scene.bar_radius();
    }
    if (d < need) return false;
  }
  return true;
}

inline CostVerdict cost(const KeypointState& s, const BimanualAction& a, const KeypointState& s_next,
                        const RigidScene& scene, const ConstraintConfig& cfg) {
  CostVerdict v;
  if (!a.all_finite() || !s_next.all_finite()) {
    v.add(Rule::kWorkspace);
    return v;
  }
  if (!check_distance(s, a, cfg)) v.add(Rule::kDistance);
  if (!check_direction(s, a, cfg)) v.add(Rule::kDirection);
  if (!check_workspace(s_next, cfg, scene.object_pose)) v.add(Rule::kWorkspace);
  if (!check_collision(s, a, scene, cfg)) v.add(Rule::kCollision);
  return v;
}

// Sampling-time next-state approximation: keypoints driven by the left
// gripper move by a_L, by the right gripper by a_R, shared ones by the mean.
inline KeypointState rigid_translate(const KeypointState& s, const BimanualAction& a,
                                     const KeypointLayout& layout = {}) {
  KeypointState out = s;
  const auto sides = layout.sides();
  for (int i = 0; i < s.size(); ++i) {
    const int side = i < static_cast<int>(sides.size()) ? sides[i] : 2;
    out[i] += side == 0 ? a.left : side == 1 ? a.right : Vec3(0.5 * (a.left + a.right));
  }
  return out;
}

// Uniform rejection sampling over the action box. nullopt means the valid
// action space looks empty (no success within max_attempts).
inline std::optional<BimanualAction> sample_valid_action(const KeypointState& s, const RigidScene& scene,
                                                         const ConstraintConfig& cfg, Rng& rng,
                                                         const KeypointLayout& layout = {}) {
  std::uniform_real_distribution<double> u(-cfg.a_max, cfg.a_max);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    BimanualAction a;
    for (int k = 0; k < 3; ++k) a.left[k] = u(rng);
    for (int k = 0; k < 3; ++k) a.right[k] = u(rng);
    if (cost(s, a, rigid_translate(s, a, layout), scene, cfg).feasible()) return a;
  }
  return std::nullopt;
}

}  // namespace fabimit
