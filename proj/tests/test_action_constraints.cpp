#include <gtest/gtest.h>

#include "fabimit/action_constraints.hpp"
#include "fabimit/scenarios.hpp"

using namespace fabimit;

namespace {

// Flat fabric: grasped edge along x at y = 0, far edge at y = +0.3. The edges
// s_L - s_far point along -y.
KeypointState flat_state(double gap = 0.3) {
  KeypointState s;
  s.points = {Vec3(-gap / 2, 0, 0), Vec3(gap / 2, 0, 0), Vec3(-0.15, 0.3, 0), Vec3(0.15, 0.3, 0)};
  return s;
}

RigidScene box_scene() {
  RigidScene sc;
  sc.kind = ScenarioKind::kBox;
  sc.object_dims = default_object_dims(ScenarioKind::kBox);
  return sc;
}

const Vec3 kAlong(0, -0.03, 0.0);

}  // namespace

TEST(Constraints, DistanceExamples) {
  const ConstraintConfig cfg;
  EXPECT_TRUE(check_distance(flat_state(0.30), BimanualAction{}, cfg));
  EXPECT_FALSE(check_distance(flat_state(0.10), BimanualAction{}, cfg));
  EXPECT_FALSE(check_distance(flat_state(0.34), BimanualAction{}, cfg));
  // the gap is measured after the action
  EXPECT_FALSE(check_distance(flat_state(0.30), BimanualAction{Vec3(0.05, 0, 0), Vec3(-0.05, 0, 0)}, ConstraintConfig{0.8}));
}

TEST(Constraints, DirectionExamples) {
  const ConstraintConfig cfg;
  const KeypointState s = flat_state();
  EXPECT_TRUE(check_direction(s, BimanualAction{kAlong, kAlong}, cfg));
  EXPECT_FALSE(check_direction(s, BimanualAction{Vec3(0.03, 0, 0), kAlong}, cfg));
  EXPECT_TRUE(check_direction(s, BimanualAction{}, cfg));
  // 45 degrees upward is inside the 60 degree cone, 70 degrees is not
  EXPECT_TRUE(check_direction(s, BimanualAction{Vec3(0, -0.03, 0.03), kAlong}, cfg));
  EXPECT_FALSE(check_direction(s, BimanualAction{Vec3(0, -0.01, 0.0275), kAlong}, cfg));
}

TEST(Constraints, WorkspaceExamples) {
  ConstraintConfig cfg;
  cfg.workspace = Aabb{Vec3(-1, -1, 0), Vec3(1, 1, 1)};
  KeypointState s;
  s.points.assign(4, Vec3(0, 0, 0.5));
  EXPECT_TRUE(check_workspace(s, cfg));
  s.points[2] = Vec3(1.001, 0, 0.5);
  EXPECT_FALSE(check_workspace(s, cfg));
  s.points[2] = Vec3(1.0, 0, 0.5);
  EXPECT_TRUE(check_workspace(s, cfg));
  // keypoints are object-frame; the workspace is world-frame
  s.points[2] = Vec3(0.9, 0, 0.5);
  EXPECT_FALSE(check_workspace(s, cfg, ObjectPose{Vec3(0.2, 0, 0), 0.0}));
}

TEST(Constraints, CollisionExamples) {
  const ConstraintConfig cfg;
  RigidScene free;
  KeypointState s = flat_state();
  const BimanualAction through{Vec3(0.15, -0.05, 0.04), Vec3(-0.15, -0.05, 0.04)};
  EXPECT_TRUE(check_collision(s, through, free, cfg));
  // left gripper path passes through the box centre
  KeypointState near;
  near.points = {Vec3(-0.15, 0, 0.04), Vec3(0.15, 0.2, 0.2), Vec3(-0.15, 0.3, 0), Vec3(0.15, 0.5, 0)};
  const BimanualAction hit{Vec3(0.30, 0, 0), Vec3::Zero()};
  EXPECT_FALSE(check_collision(near, hit, box_scene(), cfg));
  // skimming above the top face at exactly the clearance
  const double top = box_scene().box_local().hi.z();
  near.points[0] = Vec3(-0.15, 0, top + cfg.clearance);
  EXPECT_TRUE(check_collision(near, hit, box_scene(), cfg));
  near.points[0].z() -= 1e-4;
  EXPECT_FALSE(check_collision(near, hit, box_scene(), cfg));
}

TEST(Constraints, CostAggregation) {
  ConstraintConfig cfg;
  const KeypointState s = flat_state();
  const BimanualAction ok{kAlong, kAlong};
  const RigidScene free;
  CostVerdict v = cost(s, ok, rigid_translate(s, ok), free, cfg);
  EXPECT_EQ(v.cost, 0);
  EXPECT_EQ(v.violated, 0);
  EXPECT_EQ(v.describe(), "");

  cfg.workspace = Aabb{Vec3(-1, -1, 0.5), Vec3(1, 1, 1)};
  v = cost(s, ok, rigid_translate(s, ok), free, cfg);
  EXPECT_EQ(v.cost, 1);
  EXPECT_EQ(v.describe(), "workspace");

  cfg = ConstraintConfig{};
  KeypointState near;
  near.points = {Vec3(-0.05, 0, 0.04), Vec3(0.0, 0, 0.04), Vec3(-0.15, 0.3, 0), Vec3(0.15, 0.3, 0)};
  const BimanualAction bad{Vec3(0.02, 0, 0), Vec3::Zero()};
  v = cost(near, bad, rigid_translate(near, bad), box_scene(), cfg);
  EXPECT_EQ(v.cost, 1);
  EXPECT_TRUE(v.has(Rule::kDistance));
  EXPECT_TRUE(v.has(Rule::kCollision));
}

TEST(Constraints, SamplerReturnsFeasibleDeterministicAction) {
  const ConstraintConfig cfg;
  const KeypointState s = flat_state();
  const RigidScene free;
  Rng a(4), b(4);
  const auto x = sample_valid_action(s, free, cfg, a);
  const auto y = sample_valid_action(s, free, cfg, b);
  ASSERT_TRUE(x && y);
  EXPECT_EQ(x->flat(), y->flat());
  EXPECT_EQ(cost(s, *x, rigid_translate(s, *x), free, cfg).cost, 0);
}

TEST(Constraints, OverStretchedStateOnlyAllowsShrinking) {
  const ConstraintConfig cfg;
  const double gap = cfg.tau_far * cfg.edge_length + 1e-3;
  const KeypointState s = flat_state(gap);
  const RigidScene free;
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const auto a = sample_valid_action(s, free, cfg, rng);
    ASSERT_TRUE(a);
    EXPECT_LT(((s[0] + a->left) - (s[1] + a->right)).norm(), gap);
  }
  // Monte-Carlo sweep of the feasible region
  std::uniform_real_distribution<double> u(-cfg.a_max, cfg.a_max);
  int feasible = 0;
  for (int i = 0; i < 100000; ++i) {
    BimanualAction a;
    for (int k = 0; k < 3; ++k) a.left[k] = u(rng), a.right[k] = u(rng);
    if (!cost(s, a, rigid_translate(s, a), free, cfg).feasible()) continue;
    ++feasible;
    EXPECT_LT(((s[0] + a.left) - (s[1] + a.right)).norm(), gap);
  }
  EXPECT_GT(feasible, 0);
}

TEST(Constraints, SamplerSignalsExhaustion) {
  ConstraintConfig cfg;
  cfg.max_attempts = 50;
  KeypointState s = flat_state(0.01);  // grippers nearly touching: no action fixes it
  Rng rng(1);
  EXPECT_FALSE(sample_valid_action(s, RigidScene{}, cfg, rng).has_value());
}

TEST(Constraints, RigidTranslateFollowsGrippers) {
  const KeypointState s = flat_state();
  const BimanualAction a{Vec3(0.01, 0, 0), Vec3(0, 0.02, 0)};
  const KeypointState n = rigid_translate(s, a);
  EXPECT_EQ(n[0], s[0] + a.left);
  EXPECT_EQ(n[2], s[2] + a.left);
  EXPECT_EQ(n[1], s[1] + a.right);
  EXPECT_EQ(n[3], s[3] + a.right);
}

TEST(Constraints, ConfigValidation) {
  ConstraintConfig c;
  c.tau_close = 1.2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ConstraintConfig{};
  c.a_max = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
