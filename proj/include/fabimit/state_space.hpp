#pragma once

// Keypoint state extraction, object-frame transforms and the planar
// geometry (polygon IoU, centroid distance, point-cloud sampling) shared by
// the reward and the metrics.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "fabimit/fabric_sim.hpp"
#include "fabimit/geometry.hpp"
#include "fabimit/types.hpp"

namespace fabimit {

// Which mesh vertices make up the keypoint state. Four corners by default;
// with edge midpoints enabled the near, far, left and right edge midpoints
// follow as indices 4..7.
struct KeypointLayout {
  bool edge_midpoints = false;

  int count() const { return edge_midpoints ? 8 : 4; }

  std::vector<int> vertices(const FabricMesh& m) const {
    const int lr = m.rows - 1, lc = m.cols - 1;
    std::vector<int> v{m.index(0, 0), m.index(0, lc), m.index(lr, 0), m.index(lr, lc)};
    if (edge_midpoints) {
      v.push_back(m.index(0, lc / 2));
      v.push_back(m.index(lr, lc / 2));
      v.push_back(m.index(lr / 2, 0));
      v.push_back(m.index(lr / 2, lc));
    }
    return v;
  }

  // Which gripper drives each keypoint: 0 left, 1 right, 2 both (midpoint).
  std::vector<int> sides() const {
    std::vector<int> s{0, 1, 0, 1};
    if (edge_midpoints) s.insert(s.end(), {2, 2, 0, 1});
    return s;
  }
};

inline std::vector<Vec3> to_object_frame(const std::vector<Vec3>& points, const ObjectPose& pose) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.to_local(p));
  return out;
}

inline std::vector<Vec3> to_world_frame(const std::vector<Vec3>& points, const ObjectPose& pose) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(pose.to_world(p));
  return out;
}

inline KeypointState extract_keypoints(const SimState& st, const KeypointLayout& layout = {}) {
  KeypointState s;
  for (int v : layout.vertices(st.mesh)) s.points.push_back(st.scene.object_pose.to_local(st.mesh.positions[v]));
  return s;
}

inline double centroid_distance(const KeypointState& a, const KeypointState& b) {
  if (a.size() != b.size()) throw std::invalid_argument("centroid_distance: keypoint counts differ");
  return (a.centroid() - b.centroid()).norm();
}

// Mean per-keypoint Euclidean distance.
inline double mean_keypoint_distance(const KeypointState& a, const KeypointState& b) {
  if (a.size() != b.size()) throw std::invalid_argument("mean_keypoint_distance: keypoint counts differ");
  double d = 0.0;
  for (int i = 0; i < a.size(); ++i) d += (a[i] - b[i]).norm();
  return d / a.size();
}

// Convex footprint of a keypoint state projected on the table plane.
inline std::vector<Vec2> footprint(const KeypointState& s) {
  std::vector<Vec2> pts;
  pts.reserve(s.points.size());
  for (const auto& p : s.points) pts.push_back(p.head<2>());
  return convex_hull(std::move(pts));
}

struct IouResult {
  double iou = 0.0;
  bool degenerate = false;
};

inline constexpr double kDegenerateArea = 1e-12;

inline IouResult polygon_iou(std::span<const Vec2> hull_a, std::span<const Vec2> hull_b) {
  const double area_a = hull_a.size() >= 3 ? polygon_area(hull_a) : 0.0;
  const double area_b = hull_b.size() >= 3 ? polygon_area(hull_b) : 0.0;
  if (area_a <= kDegenerateArea || area_b <= kDegenerateArea) return {0.0, true};
  const double inter = convex_intersection_area(hull_a, hull_b);
  const double uni = area_a + area_b - inter;
  return {std::clamp(inter / uni, 0.0, 1.0), false};
}

inline IouResult polygon_iou(const KeypointState& a, const KeypointState& b) {
  if (a.size() < 3 || b.size() < 3) throw std::invalid_argument("polygon_iou: need at least 3 keypoints");
  const auto ha = footprint(a);
  const auto hb = footprint(b);
  return polygon_iou(ha, hb);
}

struct PointCloud {
  std::vector<Vec3> points;
};

// Deterministic uniform-stride vertex subsample, in the object frame.
inline PointCloud sample_pointcloud(const SimState& st, int n) {
  const int total = st.mesh.vertex_count();
  if (n <= 0) throw std::invalid_argument("sample_pointcloud: n must be positive");
  if (n > total) throw std::invalid_argument("sample_pointcloud: n exceeds vertex count");
  PointCloud pc;
  pc.points.reserve(n);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<int>((static_cast<long long>(i) * total) / n);
    pc.points.push_back(st.scene.object_pose.to_local(st.mesh.positions[idx]));
  }
  return pc;
}

}  // namespace fabimit
