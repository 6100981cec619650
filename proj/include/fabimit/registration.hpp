#pragma once

// Closed-form least-squares rigid registration between ordered keypoint
// sets (Kabsch), plus the rigid-transform helpers shared with the learned
// registration model.

#include <stdexcept>

#include <Eigen/SVD>

#include "fabimit/geometry.hpp"
#include "fabimit/types.hpp"

namespace fabimit {

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  EulerZYX euler() const { return EulerZYX::from_matrix(rotation); }
};

// Sum over keypoints of |R s + T - t|^2.
inline double registration_residual(const KeypointState& src, const KeypointState& tgt, const RigidTransform& tf) {
  double r = 0.0;
  for (int i = 0; i < src.size(); ++i) r += (tf.apply(src[i]) - tgt[i]).squaredNorm();
  return r;
}

struct KabschResult {
  RigidTransform transform;
  bool degenerate = false;
};

inline KabschResult kabsch_align(const KeypointState& src, const KeypointState& tgt) {
  if (src.size() != tgt.size()) throw std::invalid_argument("kabsch_align: keypoint counts differ");
  KabschResult res;
  const Vec3 cs = src.centroid();
  const Vec3 ct = tgt.centroid();
  if (src.size() < 3) {
    res.degenerate = true;
    res.transform.translation = ct - cs;
    return res;
  }
  Mat3 h = Mat3::Zero();
  for (int i = 0; i < src.size(); ++i) h += (src[i] - cs) * (tgt[i] - ct).transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  // Rank below two leaves the rotation about the point/line undetermined.
  if (!(sv[0] > 0) || sv[1] <= 1e-12 * sv[0]) {
    res.degenerate = true;
    res.transform.translation = ct - cs;
    return res;
  }
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0 ? -1.0 : 1.0;
  res.transform.rotation = v * d * u.transpose();
  res.transform.translation = ct - res.transform.rotation * cs;
  return res;
}

}  // namespace fabimit
