#pragma once

// Default scenes and the scripted anchor trajectories used to record the
// demonstrations.

#include "fabimit/demo_reward.hpp"
#include "fabimit/fabric_sim.hpp"

namespace fabimit {

// The fabric lies flat with its grasped edge centred on the world origin and
// extends along +y; objects sit behind the grasped edge (-y).
inline ScenarioSpec default_scenario(ScenarioKind kind) {
  ScenarioSpec s;
  s.kind = kind;
  switch (kind) {
    case ScenarioKind::kContactFree:
      break;
    case ScenarioKind::kBox:
      s.object_pose.position = Vec3(0.0, -0.14, 0.0);
      s.object_dims = default_object_dims(kind);
      break;
    case ScenarioKind::kHanger:
      s.object_pose.position = Vec3(0.0, -0.16, 0.0);
      s.object_dims = default_object_dims(kind);
      break;
  }
  return s;
}

// Waypoints are given as (y, z) of both anchors in the object frame; the
// anchors keep their x.
inline AnchorScript default_demo_script(const ScenarioSpec& spec) {
  std::vector<Vec2> yz;
  switch (spec.kind) {
    case ScenarioKind::kBox:
      yz = {{0.08, 0.06}, {0.01, 0.13}, {-0.08, 0.15}, {-0.18, 0.11}};
      break;
    case ScenarioKind::kHanger:
      yz = {{0.10, 0.06}, {0.04, 0.13}, {-0.02, 0.18}, {-0.15, 0.21}};
      break;
    case ScenarioKind::kContactFree:
      throw std::invalid_argument("default_demo_script: contact-free scene has no task");
  }
  const double half = 0.5 * spec.edge_length;
  const ObjectPose& pose = spec.object_pose;
  AnchorScript script;
  for (const auto& p : yz) {
    const Vec3 l = pose.to_world(Vec3(-half + spec.grasp_edge_center.x() - pose.position.x(), p.x(), p.y()));
    const Vec3 r = pose.to_world(Vec3(half + spec.grasp_edge_center.x() - pose.position.x(), p.x(), p.y()));
    script.waypoints.push_back({l, r});
  }
  return script;
}

}  // namespace fabimit
