#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace fabimit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;

// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << 1, 0, 0, 0, c, -s, 0, s, c;
  return r;
}

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, 0, s, 0, 1, 0, -s, 0, c;
  return r;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r << c, -s, 0, s, c, 0, 0, 0, 1;
  return r;
}

// Intrinsic z-y-x Euler angles: R = Rz(yaw) * Ry(pitch) * Rx(roll).
struct EulerZYX {
  double yaw = 0.0;
  double pitch = 0.0;
  double roll = 0.0;

  Mat3 matrix() const { return rot_z(yaw) * rot_y(pitch) * rot_x(roll); }

  static EulerZYX from_matrix(const Mat3& r) {
    EulerZYX e;
    e.pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
    e.yaw = std::atan2(r(1, 0), r(0, 0));
    e.roll = std::atan2(r(2, 1), r(2, 2));
    return e;
  }

  double abs_sum() const { return std::abs(yaw) + std::abs(pitch) + std::abs(roll); }
};

// Partial derivatives of the z-y-x rotation with respect to (yaw, pitch, roll).
inline std::array<Mat3, 3> euler_zyx_jacobian(double yaw, double pitch, double roll) {
  auto d_rz = [](double a) {
    Mat3 r;
    r << -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a), 0, 0, 0, 0;
    return r;
  };
  auto d_ry = [](double a) {
    Mat3 r;
    r << -std::sin(a), 0, std::cos(a), 0, 0, 0, -std::cos(a), 0, -std::sin(a);
    return r;
  };
  auto d_rx = [](double a) {
    Mat3 r;
    r << 0, 0, 0, 0, -std::sin(a), -std::cos(a), 0, std::cos(a), -std::sin(a);
    return r;
  };
  const Mat3 rz = rot_z(yaw), ry = rot_y(pitch), rx = rot_x(roll);
  return {d_rz(yaw) * ry * rx, rz * d_ry(pitch) * rx, rz * ry * d_rx(roll)};
}

inline double angle_between(const Vec3& u, const Vec3& v) {
  const double denom = u.norm() * v.norm();
  return std::acos(std::clamp(u.dot(v) / denom, -1.0, 1.0));
}

// Planar pose of a rigid object on the table: position plus yaw about +z.
struct ObjectPose {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;

  // World point expressed in the object frame.
  Vec3 to_local(const Vec3& world) const { return rot_z(-yaw) * (world - position); }
  Vec3 to_world(const Vec3& local) const { return rot_z(yaw) * local + position; }
  Vec3 rotate_to_local(const Vec3& v) const { return rot_z(-yaw) * v; }
  Vec3 rotate_to_world(const Vec3& v) const { return rot_z(yaw) * v; }
};

// ---------------------------------------------------------------------------
// Planar polygons

inline double cross2(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Signed area, positive for counter-clockwise vertex order.
inline double polygon_area(std::span<const Vec2> poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

// Andrew's monotone chain. Returns a counter-clockwise hull without repeated
// or collinear vertices.
inline std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross2(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross2(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Sutherland-Hodgman clip of `subject` against the convex counter-clockwise
// polygon `clip`. Both inputs must be convex for the result to be exact.
inline std::vector<Vec2> clip_convex(std::span<const Vec2> subject, std::span<const Vec2> clip) {
  std::vector<Vec2> out(subject.begin(), subject.end());
  const std::size_t n = clip.size();
  for (std::size_t i = 0; i < n && !out.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % n];
    std::vector<Vec2> in;
    in.swap(out);
    const std::size_t m = in.size();
    for (std::size_t j = 0; j < m; ++j) {
      const Vec2& p = in[j];
      const Vec2& q = in[(j + 1) % m];
      const double sp = cross2(a, b, p);
      const double sq = cross2(a, b, q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + t * (q - p));
      }
    }
  }
  return out;
}

inline double convex_intersection_area(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.size() < 3 || b.size() < 3) return 0.0;
  const auto inter = clip_convex(a, b);
  if (inter.size() < 3) return 0.0;
  return std::max(0.0, polygon_area(inter));
}

inline bool point_in_convex(const Vec2& p, std::span<const Vec2> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i) {
    if (cross2(poly[i], poly[(i + 1) % n], p) < 0) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Distances used by the gripper-path clearance test

struct Aabb {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
};

inline double point_aabb_distance(const Vec3& p, const Aabb& box) {
  const Vec3 d = (box.lo - p).cwiseMax(p - box.hi).cwiseMax(Vec3::Zero());
  return d.norm();
}

inline double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (a + t * ab - p).norm();
}

// Minimum over t in [0,1] of a convex function of t. Golden-section search;
// the tolerance is far below any geometric scale in the workbench.
template <class F>
double minimize_convex_1d(F&& f) {
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double lo = 0.0, hi = 1.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80; ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = f(x2);
    }
  }
  return std::min({f(0.0), f(1.0), f1, f2});
}

inline double segment_aabb_distance(const Vec3& a, const Vec3& b, const Aabb& box) {
  return minimize_convex_1d([&](double t) { return point_aabb_distance(a + t * (b - a), box); });
}

inline double segment_segment_distance(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d) {
  return minimize_convex_1d([&](double t) { return point_segment_distance(a + t * (b - a), c, d); });
}

}  // namespace fabimit
