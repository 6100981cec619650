#pragma once

// Deterministic mass-spring fabric simulator: a rows x cols grid with
// structural, shear and bend springs, two kinematic gripper anchors on
// adjacent corners, a table plane and one optional fixed rigid object.

#include <array>
#include <limits>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fabimit/errors.hpp"
#include "fabimit/geometry.hpp"
#include "fabimit/types.hpp"

namespace fabimit {

enum class SpringKind : std::uint8_t { kStructural, kShear, kBend };

struct Spring {
  int a = 0;
  int b = 0;
  double rest_length = 0.0;
  SpringKind kind = SpringKind::kStructural;
};

struct FabricMesh {
  int rows = 0;
  int cols = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> velocities;
  double rest_edge_length = 0.0;  // spacing between neighbouring vertices
  std::vector<Spring> springs;

  int index(int r, int c) const { return r * cols + c; }
  int vertex_count() const { return rows * cols; }
};

enum class ScenarioKind : std::uint8_t { kContactFree, kBox, kHanger };

inline std::string to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kContactFree: return "contact-free";
    case ScenarioKind::kBox: return "box";
    case ScenarioKind::kHanger: return "hanger";
  }
  return "?";
}

inline ScenarioKind scenario_from_string(const std::string& s) {
  if (s == "contact-free" || s == "none") return ScenarioKind::kContactFree;
  if (s == "box") return ScenarioKind::kBox;
  if (s == "hanger" || s == "hang") return ScenarioKind::kHanger;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

// Box dims: (size x, size y, height). Hanger dims: (bar length, bar radius,
// bar axis height). Object geometry is expressed in the object frame: the box
// is centred on the origin and rests on z = 0, the hanger bar runs along +x
// through (0, 0, height).
struct RigidScene {
  ScenarioKind kind = ScenarioKind::kContactFree;
  ObjectPose object_pose;
  Vec3 object_dims = Vec3::Zero();
  double table_height = 0.0;
  Aabb workspace{Vec3(-0.45, -0.55, 0.0), Vec3(0.45, 0.45, 0.45)};

  bool has_object() const { return kind != ScenarioKind::kContactFree; }
  Aabb box_local() const {
    return {Vec3(-0.5 * object_dims.x(), -0.5 * object_dims.y(), 0.0),
            Vec3(0.5 * object_dims.x(), 0.5 * object_dims.y(), object_dims.z())};
  }
  double bar_half_length() const { return 0.5 * object_dims.x(); }
  double bar_radius() const { return object_dims.y(); }
  double bar_height() const { return object_dims.z(); }
};

struct SimConfig {
  int substeps_per_action = 250;
  double dt = 0.002;
  double gravity = 9.81;
  double fabric_mass = 0.1;  // kg, spread evenly over the vertices
  double k_structural = 60.0;
  double k_shear = 15.0;
  double k_bend = 2.0;
  double spring_damping = 0.04;  // N s / m along each spring
  double damping = 4.0;          // 1/s, velocity damping
  double friction = 0.5;
  double max_strain = 0.05;       // structural strain limit
  int strain_iterations = 4;
  double contact_margin = 0.004;  // fabric half-thickness kept off surfaces
  double penetration_tolerance = 1e-3;
  int settle_steps = 20;  // macro steps of free settling after release
  double rest_kinetic_energy = 1e-7;
  double cover_fraction = 0.9;
  std::uint64_t seed = 0;

  double macro_duration() const { return dt * substeps_per_action; }
  double vertex_mass(int n) const { return fabric_mass / n; }

  void validate() const {
    if (substeps_per_action <= 0 || !(dt > 0) || !(gravity > 0) || !(fabric_mass > 0) ||
        !(k_structural > 0) || !(k_shear > 0) || !(k_bend > 0) || !(spring_damping > 0) ||
        !(damping > 0) || !(friction > 0) || !(contact_margin > 0) ||
        !(penetration_tolerance > 0) || !(max_strain > 0) || strain_iterations < 0 || settle_steps <= 0 || !(rest_kinetic_energy > 0)) {
      throw ConfigError("sim: physical constants must be strictly positive");
    }
    if (!(cover_fraction > 0 && cover_fraction <= 1)) throw ConfigError("sim: cover_fraction must lie in (0,1]");
  }
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kContactFree;
  int rows = 16;
  int cols = 16;
  double edge_length = 0.3;               // rest length of the grasped edge
  Vec2 grasp_edge_center = Vec2(0, 0.0);  // world xy of the grasped-edge midpoint
  double fabric_yaw = 0.0;                // fabric extends along +y rotated by this
  double grasp_offset = 0.0;              // anchor height above the table
  ObjectPose object_pose;
  Vec3 object_dims = Vec3::Zero();
  double table_height = 0.0;
  Aabb workspace{Vec3(-0.45, -0.55, 0.0), Vec3(0.45, 0.45, 0.45)};
};

struct SimState {
  FabricMesh mesh;
  RigidScene scene;
  std::array<Vec3, 2> anchors{Vec3::Zero(), Vec3::Zero()};
  std::array<int, 2> grasped_vertices{0, 0};
  bool grasped = true;
  std::int64_t time_step_index = 0;
};

// Default object geometry per scenario.
inline Vec3 default_object_dims(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kBox: return {0.12, 0.12, 0.08};
    case ScenarioKind::kHanger: return {0.5, 0.012, 0.12};
    case ScenarioKind::kContactFree: break;
  }
  return Vec3::Zero();
}

namespace detail {

inline void add_springs(FabricMesh& m) {
  const double d = m.rest_edge_length;
  auto add = [&](int r0, int c0, int r1, int c1, SpringKind kind) {
    if (r1 < 0 || r1 >= m.rows || c1 < 0 || c1 >= m.cols) return;
    const double len = (kind == SpringKind::kShear) ? d * std::sqrt(2.0)
                       : (kind == SpringKind::kBend) ? 2.0 * d
                                                     : d;
    m.springs.push_back({m.index(r0, c0), m.index(r1, c1), len, kind});
  };
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      add(r, c, r, c + 1, SpringKind::kStructural);
      add(r, c, r + 1, c, SpringKind::kStructural);
      add(r, c, r + 1, c + 1, SpringKind::kShear);
      add(r, c, r + 1, c - 1, SpringKind::kShear);
      add(r, c, r, c + 2, SpringKind::kBend);
      add(r, c, r + 2, c, SpringKind::kBend);
    }
  }
}

struct Contact {
  int vertex;
  Vec3 normal;
};

// Pushes every vertex out of the table and the rigid object. Returns the
// outward normal of each contact.
inline void project_contacts(const RigidScene& scene, const SimConfig& cfg, std::vector<Vec3>& x,
                             std::vector<Contact>& contacts, const std::array<int, 2>* pinned = nullptr) {
  contacts.clear();
  const double margin = cfg.contact_margin;
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n; ++i) {
    if (pinned && (i == (*pinned)[0] || i == (*pinned)[1])) continue;
    Vec3& p = x[i];
    if (p.z() < scene.table_height) {
      p.z() = scene.table_height;
      contacts.push_back({i, Vec3::UnitZ()});
    }
    if (scene.kind == ScenarioKind::kBox) {
      const Vec3 q = scene.object_pose.to_local(p);
      Aabb b = scene.box_local();
      b.lo -= Vec3(margin, margin, 0.0);
      b.hi += Vec3(margin, margin, margin);
      if (b.contains(q)) {
        // Least-penetration face; the bottom face rests on the table.
        std::array<double, 5> depth{q.x() - b.lo.x(), b.hi.x() - q.x(), q.y() - b.lo.y(),
                                    b.hi.y() - q.y(), b.hi.z() - q.z()};
        int face = 0;
        for (int f = 1; f < 5; ++f)
          if (depth[f] < depth[face]) face = f;
        Vec3 local = q;
        Vec3 normal = Vec3::Zero();
        switch (face) {
          case 0: local.x() = b.lo.x(); normal = -Vec3::UnitX(); break;
          case 1: local.x() = b.hi.x(); normal = Vec3::UnitX(); break;
          case 2: local.y() = b.lo.y(); normal = -Vec3::UnitY(); break;
          case 3: local.y() = b.hi.y(); normal = Vec3::UnitY(); break;
          default: local.z() = b.hi.z(); normal = Vec3::UnitZ(); break;
        }
        p = scene.object_pose.to_world(local);
        contacts.push_back({i, scene.object_pose.rotate_to_world(normal)});
      }
    } else if (scene.kind == ScenarioKind::kHanger) {
      const Vec3 q = scene.object_pose.to_local(p);
      if (std::abs(q.x()) <= scene.bar_half_length()) {
        const Vec2 radial(q.y(), q.z() - scene.bar_height());
        const double reach = scene.bar_radius() + margin;
        const double dist = radial.norm();
        if (dist < reach) {
          const Vec2 dir = dist > 1e-12 ? Vec2(radial / dist) : Vec2(0.0, 1.0);
          const Vec3 local(q.x(), dir.x() * reach, scene.bar_height() + dir.y() * reach);
          p = scene.object_pose.to_world(local);
          contacts.push_back({i, scene.object_pose.rotate_to_world(Vec3(0.0, dir.x(), dir.y()))});
        }
      }
    }
  }
}

// Removes inward normal velocity and applies Coulomb-style tangential damping
// proportional to the removed normal impulse.
inline void contact_velocities(const std::vector<Contact>& contacts, double mu, std::vector<Vec3>& v) {
  for (const auto& c : contacts) {
    Vec3& vel = v[c.vertex];
    const double vn = vel.dot(c.normal);
    if (vn >= 0.0) continue;
    vel -= vn * c.normal;
    Vec3 vt = vel - vel.dot(c.normal) * c.normal;
    const double vt_norm = vt.norm();
    const double limit = mu * (-vn);
    if (vt_norm <= limit) {
      vel -= vt;
    } else {
      vel -= vt * (limit / vt_norm);
    }
  }
}

inline double spring_stiffness(const SimConfig& cfg, SpringKind k) {
  switch (k) {
    case SpringKind::kStructural: return cfg.k_structural;
    case SpringKind::kShear: return cfg.k_shear;
    case SpringKind::kBend: return cfg.k_bend;
  }
  return 0.0;
}

inline void accelerations(const FabricMesh& m, const SimConfig& cfg, const std::vector<Vec3>& x,
                          const std::vector<Vec3>& v, std::vector<Vec3>& acc) {
  const int n = m.vertex_count();
  const double mass = cfg.vertex_mass(n);
  acc.assign(n, Vec3(0.0, 0.0, -cfg.gravity));
  for (int i = 0; i < n; ++i) acc[i] -= cfg.damping * v[i];
  const double inv_m = 1.0 / mass;
  for (const auto& s : m.springs) {
    const Vec3 d = x[s.b] - x[s.a];
    const double len = d.norm();
    if (len < 1e-12) continue;
    const Vec3 dir = d / len;
    const double rel = (v[s.b] - v[s.a]).dot(dir);
    const double f = spring_stiffness(cfg, s.kind) * (len - s.rest_length) + cfg.spring_damping * rel;
    const Vec3 fv = (f * inv_m) * dir;
    acc[s.a] += fv;
    acc[s.b] -= fv;
  }
}

// Provot-style strain limiting on structural springs. Pinned vertices do not
// move. Position corrections are mirrored into `v` as (dx / dt).
inline void limit_strain(const FabricMesh& m, const SimConfig& cfg, std::vector<Vec3>& x, std::vector<Vec3>& v,
                         const std::array<int, 2>* pinned) {
  const double inv_dt = 1.0 / cfg.dt;
  auto is_pinned = [&](int i) { return pinned && (i == (*pinned)[0] || i == (*pinned)[1]); };
  for (int it = 0; it < cfg.strain_iterations; ++it) {
    bool changed = false;
    for (const auto& s : m.springs) {
      if (s.kind != SpringKind::kStructural) continue;
      const Vec3 d = x[s.b] - x[s.a];
      const double len = d.norm();
      const double max_len = s.rest_length * (1.0 + cfg.max_strain);
      if (len <= max_len) continue;
      const bool pa = is_pinned(s.a), pb = is_pinned(s.b);
      if (pa && pb) continue;
      const Vec3 excess = d * ((len - max_len) / len);
      const double wa = pa ? 0.0 : (pb ? 1.0 : 0.5);
      const double wb = 1.0 - wa;
      x[s.a] += wa * excess;
      v[s.a] += (wa * inv_dt) * excess;
      x[s.b] -= wb * excess;
      v[s.b] -= (wb * inv_dt) * excess;
      changed = true;
    }
    if (!changed) break;
  }
}

// One velocity-Verlet substep. `anchor_from`/`anchor_to` are the anchor
// positions at the start and end of the substep (ignored when released).
inline void substep(SimState& st, const SimConfig& cfg, const std::array<Vec3, 2>& anchor_from,
                    const std::array<Vec3, 2>& anchor_to) {
  FabricMesh& m = st.mesh;
  const double dt = cfg.dt;
  thread_local std::vector<Vec3> acc;
  thread_local std::vector<Vec3> vh;
  thread_local std::vector<Contact> contacts;

  accelerations(m, cfg, m.positions, m.velocities, acc);
  vh.resize(m.velocities.size());
  for (std::size_t i = 0; i < vh.size(); ++i) {
    vh[i] = m.velocities[i] + 0.5 * dt * acc[i];
    m.positions[i] += dt * vh[i];
  }
  const std::array<int, 2>* pinned = st.grasped ? &st.grasped_vertices : nullptr;
  if (st.grasped) {
    for (int k = 0; k < 2; ++k) {
      const int g = st.grasped_vertices[k];
      m.positions[g] = anchor_to[k];
      vh[g] = (anchor_to[k] - anchor_from[k]) / dt;
    }
  }
  limit_strain(m, cfg, m.positions, vh, pinned);
  project_contacts(st.scene, cfg, m.positions, contacts, pinned);
  contact_velocities(contacts, cfg.friction, vh);
  accelerations(m, cfg, m.positions, vh, acc);
  for (std::size_t i = 0; i < vh.size(); ++i) m.velocities[i] = vh[i] + 0.5 * dt * acc[i];
  contact_velocities(contacts, cfg.friction, m.velocities);
  if (st.grasped) {
    for (int k = 0; k < 2; ++k) m.velocities[st.grasped_vertices[k]] = vh[st.grasped_vertices[k]];
  }
}

}  // namespace detail

inline SimState init_scenario(const ScenarioSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2) throw ConfigError("scenario: fabric grid needs at least 2x2 vertices");
  if (!(spec.edge_length > 0)) throw ConfigError("scenario: edge_length must be positive");
  SimState st;
  st.scene.kind = spec.kind;
  st.scene.table_height = spec.table_height;
  st.scene.workspace = spec.workspace;
  if (spec.kind == ScenarioKind::kContactFree) {
    st.scene.object_pose = ObjectPose{};
    st.scene.object_dims = Vec3::Zero();
  } else {
    st.scene.object_pose = spec.object_pose;
    st.scene.object_dims = spec.object_dims.isZero() ? default_object_dims(spec.kind) : spec.object_dims;
    const Vec3& p = spec.object_pose.position;
    const Aabb& w = spec.workspace;
    if (p.x() < w.lo.x() || p.x() > w.hi.x() || p.y() < w.lo.y() || p.y() > w.hi.y()) {
      throw ConfigError("scenario: object pose outside the workspace");
    }
  }

  FabricMesh& m = st.mesh;
  m.rows = spec.rows;
  m.cols = spec.cols;
  m.rest_edge_length = spec.edge_length / (spec.cols - 1);
  const Mat3 yaw = rot_z(spec.fabric_yaw);
  const Vec3 origin(spec.grasp_edge_center.x(), spec.grasp_edge_center.y(), spec.table_height);
  m.positions.resize(m.vertex_count());
  m.velocities.assign(m.vertex_count(), Vec3::Zero());
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      const Vec3 local(-0.5 * spec.edge_length + c * m.rest_edge_length, r * m.rest_edge_length, 0.0);
      m.positions[m.index(r, c)] = origin + yaw * local;
    }
  }
  for (const auto& p : m.positions) {
    if (!spec.workspace.contains(p)) throw ConfigError("scenario: fabric does not fit inside the workspace");
  }
  detail::add_springs(m);

  st.grasped_vertices = {m.index(0, 0), m.index(0, m.cols - 1)};
  for (int k = 0; k < 2; ++k) {
    Vec3& p = m.positions[st.grasped_vertices[k]];
    p.z() += spec.grasp_offset;
    st.anchors[k] = p;
  }
  st.grasped = true;
  st.time_step_index = 0;
  return st;
}

// Executes one macro action: both anchors translate linearly over the
// substeps, the mesh follows under springs, gravity and contact.
inline SimState step(SimState state, const BimanualAction& action, const SimConfig& cfg) {
  if (!state.grasped) throw std::logic_error("step: fabric is not grasped");
  if (!action.all_finite()) throw std::invalid_argument("step: non-finite action");
  const Vec3& left = action.left;
  const Vec3& right = action.right;
  const std::array<Vec3, 2> start = state.anchors;
  const std::array<Vec3, 2> goal{start[0] + left, start[1] + right};
  const int n = cfg.substeps_per_action;
  std::array<Vec3, 2> prev = start;
  for (int k = 1; k <= n; ++k) {
    std::array<Vec3, 2> cur = goal;
    if (k < n) {
      const double t = static_cast<double>(k) / n;
      cur = {start[0] + t * left, start[1] + t * right};
    }
    detail::substep(state, cfg, prev, cur);
    prev = cur;
  }
  state.anchors = goal;
  for (int k = 0; k < 2; ++k) state.mesh.positions[state.grasped_vertices[k]] = goal[k];
  ++state.time_step_index;
  return state;
}

inline double kinetic_energy(const SimState& st, const SimConfig& cfg) {
  const double m = cfg.vertex_mass(st.mesh.vertex_count());
  double e = 0.0;
  for (const auto& v : st.mesh.velocities) e += 0.5 * m * v.squaredNorm();
  return e;
}

// Kinetic + gravitational (relative to the table) + spring energy.
inline double mechanical_energy(const SimState& st, const SimConfig& cfg) {
  const double m = cfg.vertex_mass(st.mesh.vertex_count());
  double e = kinetic_energy(st, cfg);
  for (const auto& p : st.mesh.positions) e += m * cfg.gravity * (p.z() - st.scene.table_height);
  for (const auto& s : st.mesh.springs) {
    const double ext = (st.mesh.positions[s.b] - st.mesh.positions[s.a]).norm() - s.rest_length;
    e += 0.5 * detail::spring_stiffness(cfg, s.kind) * ext * ext;
  }
  return e;
}

// One macro step of free motion (no anchor constraint).
inline void settle_once(SimState& st, const SimConfig& cfg) {
  const std::array<Vec3, 2> none = st.anchors;
  const bool grasped = st.grasped;
  st.grasped = false;
  for (int k = 0; k < cfg.substeps_per_action; ++k) detail::substep(st, cfg, none, none);
  st.grasped = grasped;
}

inline SimState release_and_settle(SimState state, const SimConfig& cfg) {
  state.grasped = false;
  for (int s = 0; s < cfg.settle_steps; ++s) {
    settle_once(state, cfg);
    if (kinetic_energy(state, cfg) < cfg.rest_kinetic_energy) break;
  }
  return state;
}

// Signed distance of a world point to the table and the rigid object surface
// (negative inside). The fabric contact margin is not included.
inline double signed_distance(const RigidScene& scene, const Vec3& p) {
  double d = p.z() - scene.table_height;
  if (scene.kind == ScenarioKind::kBox) {
    const Vec3 q = scene.object_pose.to_local(p);
    const Aabb b = scene.box_local();
    if (b.contains(q)) {
      const double inside = std::min({q.x() - b.lo.x(), b.hi.x() - q.x(), q.y() - b.lo.y(), b.hi.y() - q.y(),
                                      b.hi.z() - q.z()});
      d = std::min(d, -inside);
    } else {
      d = std::min(d, point_aabb_distance(q, b));
    }
  } else if (scene.kind == ScenarioKind::kHanger) {
    const Vec3 q = scene.object_pose.to_local(p);
    const double h = scene.bar_half_length();
    const Vec3 a(-h, 0.0, scene.bar_height()), b(h, 0.0, scene.bar_height());
    d = std::min(d, point_segment_distance(q, a, b) - scene.bar_radius());
  }
  return d;
}

inline double min_signed_distance(const SimState& st) {
  double d = std::numeric_limits<double>::infinity();
  for (const auto& p : st.mesh.positions) d = std::min(d, signed_distance(st.scene, p));
  return d;
}

// Largest relative extension over structural springs.
inline double max_structural_strain(const FabricMesh& m) {
  double s = 0.0;
  for (const auto& sp : m.springs) {
    if (sp.kind != SpringKind::kStructural) continue;
    const double len = (m.positions[sp.b] - m.positions[sp.a]).norm();
    s = std::max(s, std::abs(len - sp.rest_length) / sp.rest_length);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Success judge

// Fraction of the box top face (sampled on a grid of `resolution` metres)
// lying under fabric that rests at or above the top face.
inline double box_top_coverage(const SimState& st, double resolution = 1e-3) {
  const RigidScene& sc = st.scene;
  const Aabb top = sc.box_local();
  const double top_z = top.hi.z();
  const FabricMesh& m = st.mesh;
  std::vector<Vec3> local(m.positions.size());
  for (std::size_t i = 0; i < local.size(); ++i) local[i] = sc.object_pose.to_local(m.positions[i]);

  const int nx = static_cast<int>(std::round((top.hi.x() - top.lo.x()) / resolution));
  const int ny = static_cast<int>(std::round((top.hi.y() - top.lo.y()) / resolution));
  std::vector<char> covered(static_cast<std::size_t>(nx) * ny, 0);
  auto mark_triangle = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    const double zmin = std::min({a.z(), b.z(), c.z()});
    if (zmin < top_z - 0.5 * sc.object_dims.z()) return;
    std::array<Vec2, 3> tri{a.head<2>(), b.head<2>(), c.head<2>()};
    if (cross2(tri[0], tri[1], tri[2]) < 0) std::swap(tri[1], tri[2]);
    const double xlo = std::min({tri[0].x(), tri[1].x(), tri[2].x()});
    const double xhi = std::max({tri[0].x(), tri[1].x(), tri[2].x()});
    const double ylo = std::min({tri[0].y(), tri[1].y(), tri[2].y()});
    const double yhi = std::max({tri[0].y(), tri[1].y(), tri[2].y()});
    const int i0 = std::max(0, static_cast<int>(std::floor((xlo - top.lo.x()) / resolution - 0.5)));
    const int i1 = std::min(nx - 1, static_cast<int>(std::ceil((xhi - top.lo.x()) / resolution - 0.5)));
    const int j0 = std::max(0, static_cast<int>(std::floor((ylo - top.lo.y()) / resolution - 0.5)));
    const int j1 = std::min(ny - 1, static_cast<int>(std::ceil((yhi - top.lo.y()) / resolution - 0.5)));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const Vec2 p(top.lo.x() + (i + 0.5) * resolution, top.lo.y() + (j + 0.5) * resolution);
        if (point_in_convex(p, tri)) covered[static_cast<std::size_t>(i) * ny + j] = 1;
      }
    }
  };
  for (int r = 0; r + 1 < m.rows; ++r) {
    for (int c = 0; c + 1 < m.cols; ++c) {
      const Vec3& p00 = local[m.index(r, c)];
      const Vec3& p01 = local[m.index(r, c + 1)];
      const Vec3& p10 = local[m.index(r + 1, c)];
      const Vec3& p11 = local[m.index(r + 1, c + 1)];
      mark_triangle(p00, p01, p11);
      mark_triangle(p00, p11, p10);
    }
  }
  std::size_t count = 0;
  for (char c : covered) count += c;
  return static_cast<double>(count) / covered.size();
}

inline bool check_success(const SimState& st, const SimConfig& cfg) {
  if (st.grasped) throw std::logic_error("check_success: grippers must be released first");
  const RigidScene& sc = st.scene;
  const FabricMesh& m = st.mesh;
  switch (sc.kind) {
    case ScenarioKind::kContactFree:
      throw std::logic_error("check_success: contact-free scenario has no goal");
    case ScenarioKind::kBox: {
      Vec3 centroid = Vec3::Zero();
      for (const auto& p : m.positions) centroid += sc.object_pose.to_local(p);
      centroid /= m.vertex_count();
      const Aabb top = sc.box_local();
      const bool over = centroid.x() >= top.lo.x() && centroid.x() <= top.hi.x() && centroid.y() >= top.lo.y() &&
                        centroid.y() <= top.hi.y();
      return over && box_top_coverage(st) >= cfg.cover_fraction;
    }
    case ScenarioKind::kHanger: {
      const double r = sc.bar_radius();
      const double reach = r + cfg.contact_margin + 2.0 * cfg.penetration_tolerance;
      bool row_front = false, row_back = false, resting = false;
      double lowest = std::numeric_limits<double>::infinity();
      for (int row = 0; row < m.rows; ++row) {
        bool all_front = true, all_back = true;
        for (int c = 0; c < m.cols; ++c) {
          const Vec3 q = sc.object_pose.to_local(m.positions[m.index(row, c)]);
          all_front = all_front && q.y() > r;
          all_back = all_back && q.y() < -r;
          lowest = std::min(lowest, q.z());
          if (std::abs(q.x()) <= sc.bar_half_length() && q.z() >= sc.bar_height() &&
              Vec2(q.y(), q.z() - sc.bar_height()).norm() <= reach) {
            resting = true;
          }
        }
        row_front = row_front || all_front;
        row_back = row_back || all_back;
      }
      return row_front && row_back && resting && lowest < sc.bar_height();
    }
  }
  return false;
}

}  // namespace fabimit
