#include <gtest/gtest.h>

#include "fabimit/scenarios.hpp"
#include "fabimit/state_space.hpp"

using namespace fabimit;

TEST(StateSpace, IdentityPoseKeypointsAreCorners) {
  const SimState st = init_scenario(default_scenario(ScenarioKind::kContactFree));
  const KeypointState s = extract_keypoints(st);
  ASSERT_EQ(s.size(), 4);
  const FabricMesh& m = st.mesh;
  EXPECT_EQ(s[0], m.positions[m.index(0, 0)]);
  EXPECT_EQ(s[1], m.positions[m.index(0, 15)]);
  EXPECT_EQ(s[2], m.positions[m.index(15, 0)]);
  EXPECT_EQ(s[3], m.positions[m.index(15, 15)]);
  EXPECT_LT(s[0].x(), s[1].x());  // left before right
}

TEST(StateSpace, EdgeMidpointLayoutHasEightKeypoints) {
  const SimState st = init_scenario(default_scenario(ScenarioKind::kContactFree));
  KeypointLayout l;
  l.edge_midpoints = true;
  EXPECT_EQ(extract_keypoints(st, l).size(), 8);
  EXPECT_EQ(l.sides().size(), 8u);
}

TEST(StateSpace, YawedObjectRotatesKeypoints) {
  ScenarioSpec spec = default_scenario(ScenarioKind::kBox);
  spec.object_pose = ObjectPose{Vec3::Zero(), kPi / 2};
  const SimState st = init_scenario(spec);
  const KeypointState s = extract_keypoints(st);
  const auto verts = KeypointLayout{}.vertices(st.mesh);
  for (int i = 0; i < 4; ++i) {
    EXPECT_LT((s[i] - rot_z(-kPi / 2) * st.mesh.positions[verts[i]]).norm(), 1e-12);
  }
}

TEST(StateSpace, FrameConversions) {
  const std::vector<Vec3> pts{{0.1, 0.2, 0.0}, {-0.3, 0.05, 0.1}, {0.0, -0.1, 0.2}};
  EXPECT_EQ(to_object_frame(pts, ObjectPose{}), pts);
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  c /= 3.0;
  const auto local = to_object_frame(pts, ObjectPose{c, 0.4});
  Vec3 lc = Vec3::Zero();
  for (const auto& p : local) lc += p;
  EXPECT_LT(lc.norm(), 1e-12);
  const auto back = to_world_frame(local, ObjectPose{c, 0.4});
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LT((back[i] - pts[i]).norm(), 1e-9);
}

TEST(StateSpace, CentroidDistanceThreeFourFive) {
  const SimState st = init_scenario(default_scenario(ScenarioKind::kContactFree));
  const KeypointState a = extract_keypoints(st);
  KeypointState b = a;
  for (auto& p : b.points) p += Vec3(0.03, 0.04, 0.0);
  EXPECT_NEAR(centroid_distance(a, b), 0.05, 1e-12);
  EXPECT_NEAR(centroid_distance(a, a), 0.0, 0.0);
  EXPECT_NEAR(centroid_distance(a, b), centroid_distance(b, a), 1e-15);
  EXPECT_NEAR(mean_keypoint_distance(a, b), 0.05, 1e-12);
}

TEST(StateSpace, KeypointIou) {
  const SimState st = init_scenario(default_scenario(ScenarioKind::kContactFree));
  const KeypointState a = extract_keypoints(st);
  KeypointState b = a;
  for (auto& p : b.points) p.x() += 0.15;
  EXPECT_NEAR(polygon_iou(a, a).iou, 1.0, 1e-12);
  EXPECT_NEAR(polygon_iou(a, b).iou, 1.0 / 3.0, 1e-12);
}

TEST(StateSpace, PointCloudSampling) {
  const SimState st = init_scenario(default_scenario(ScenarioKind::kBox));
  const PointCloud all = sample_pointcloud(st, 256);
  ASSERT_EQ(all.points.size(), 256u);
  for (int i = 0; i < 256; ++i) {
    EXPECT_EQ(all.points[i], st.scene.object_pose.to_local(st.mesh.positions[i]));
  }
  const PointCloud a = sample_pointcloud(st, 200), b = sample_pointcloud(st, 200);
  ASSERT_EQ(a.points.size(), 200u);
  EXPECT_EQ(a.points, b.points);
  EXPECT_THROW(sample_pointcloud(st, 300), std::invalid_argument);
  EXPECT_THROW(sample_pointcloud(st, 0), std::invalid_argument);
}

TEST(StateSpace, FlatRoundTrip) {
  const KeypointState s = extract_keypoints(init_scenario(default_scenario(ScenarioKind::kHanger)));
  const KeypointState back = KeypointState::from_flat(s.flat());
  EXPECT_EQ(back.points, s.points);
  const BimanualAction a{Vec3(1, 2, 3), Vec3(4, 5, 6)};
  const BimanualAction b = BimanualAction::from_flat(a.flat());
  EXPECT_EQ(b.left, a.left);
  EXPECT_EQ(b.right, a.right);
}
