#pragma once

#include <vector>

#include <Eigen/Dense>

#include "fabimit/geometry.hpp"

namespace fabimit {

// Ordered keypoints in the rigid-object frame. Index 0 is the left grasped
// corner, 1 the right grasped corner, 2 the left far corner, 3 the right far
// corner; optional edge midpoints follow.
struct KeypointState {
  std::vector<Vec3> points;

  int size() const { return static_cast<int>(points.size()); }
  const Vec3& operator[](int i) const { return points[i]; }
  Vec3& operator[](int i) { return points[i]; }

  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(3 * points.size());
    for (std::size_t i = 0; i < points.size(); ++i) v.segment<3>(3 * i) = points[i];
    return v;
  }
  static KeypointState from_flat(const Eigen::Ref<const Eigen::VectorXd>& v) {
    KeypointState s;
    s.points.resize(v.size() / 3);
    for (std::size_t i = 0; i < s.points.size(); ++i) s.points[i] = v.segment<3>(3 * i);
    return s;
  }
  Vec3 centroid() const {
    Vec3 c = Vec3::Zero();
    for (const auto& p : points) c += p;
    return c / static_cast<double>(points.size());
  }
  bool all_finite() const {
    for (const auto& p : points)
      if (!p.allFinite()) return false;
    return true;
  }
  bool operator==(const KeypointState&) const = default;
};

// Relative end-effector displacements of the left and right grippers.
struct BimanualAction {
  Vec3 left = Vec3::Zero();
  Vec3 right = Vec3::Zero();

  Eigen::Matrix<double, 6, 1> flat() const {
    Eigen::Matrix<double, 6, 1> v;
    v << left, right;
    return v;
  }
  static BimanualAction from_flat(const Eigen::Ref<const Eigen::VectorXd>& v) {
    return {v.segment<3>(0), v.segment<3>(3)};
  }
  bool all_finite() const { return left.allFinite() && right.allFinite(); }
  double norm() const { return flat().norm(); }
  BimanualAction clamped(double a_max) const {
    return {left.cwiseMax(-a_max).cwiseMin(a_max), right.cwiseMax(-a_max).cwiseMin(a_max)};
  }
  bool operator==(const BimanualAction&) const = default;
};

}  // namespace fabimit
