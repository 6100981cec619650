#pragma once

// Random-exploration transition dataset and the three learned priors:
// forward dynamics, inverse dynamics and rigid registration.

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabimit/action_constraints.hpp"
#include "fabimit/atomic_file.hpp"
#include "fabimit/errors.hpp"
#include "fabimit/fabric_sim.hpp"
#include "fabimit/random.hpp"
#include "fabimit/registration.hpp"
#include "fabimit/state_space.hpp"
#include "fabimit/tiny_net.hpp"
#include "fabimit/types.hpp"

namespace fabimit {

struct Transition {
  KeypointState s;
  BimanualAction a;
  KeypointState s_next;
};

struct TransitionDataset {
  std::vector<Transition> records;
  int keypoints = 4;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  std::size_t size() const { return records.size(); }

  std::uint64_t hash() const {
    Fnv1a h;
    h.update_value(static_cast<std::uint32_t>(keypoints));
    for (const auto& r : records) {
      for (const auto& p : r.s.points) h.update_value(p);
      h.update_value(r.a.left);
      h.update_value(r.a.right);
      for (const auto& p : r.s_next.points) h.update_value(p);
    }
    return h.digest();
  }
};

struct CollectConfig {
  int count = 10000;
  int horizon = 30;
  double yaw_range = 0.3;  // initial fabric yaw drawn from [-yaw_range, yaw_range]
  ScenarioSpec scenario;
  SimConfig sim;
  ConstraintConfig constraints;
  KeypointLayout layout;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

// Episodes of random valid actions in the contact-free scene. An episode
// resets after `horizon` steps or when no valid action can be found.
inline TransitionDataset collect_dataset(const CollectConfig& cfg) {
  if (cfg.count <= 0 || cfg.horizon <= 0) throw ConfigError("collect: count and horizon must be positive");
  cfg.sim.validate();
  cfg.constraints.validate();
  TransitionDataset ds;
  ds.keypoints = cfg.layout.count();
  ds.seed = cfg.seed;
  ds.config_hash = cfg.config_hash;
  ds.records.reserve(static_cast<std::size_t>(cfg.count));
  Rng rng(cfg.seed);
  ScenarioSpec spec = cfg.scenario;
  spec.kind = ScenarioKind::kContactFree;

  while (static_cast<int>(ds.records.size()) < cfg.count) {
    spec.fabric_yaw = uniform(rng, -cfg.yaw_range, cfg.yaw_range);
    SimState st = init_scenario(spec);
    KeypointState s = extract_keypoints(st, cfg.layout);
    for (int t = 0; t < cfg.horizon && static_cast<int>(ds.records.size()) < cfg.count; ++t) {
      const auto a = sample_valid_action(s, st.scene, cfg.constraints, rng, cfg.layout);
      if (!a) break;
      st = step(std::move(st), *a, cfg.sim);
      KeypointState s_next = extract_keypoints(st, cfg.layout);
      ds.records.push_back({s, *a, s_next});
      s = std::move(s_next);
    }
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset files
//
//   magic "FIMDATA\0" | u32 version | u64 count | u32 M | u64 config_hash | u64 seed
//   per record: f64 S[3M] | f64 A[6] | f64 S_next[3M]

inline constexpr char kDataMagic[8] = {'F', 'I', 'M', 'D', 'A', 'T', 'A', '\0'};
inline constexpr std::uint32_t kDataVersion = 1;

inline void write_dataset(std::ostream& os, const TransitionDataset& ds) {
  using namespace detail;
  os.write(kDataMagic, sizeof(kDataMagic));
  write_pod(os, kDataVersion);
  write_pod(os, static_cast<std::uint64_t>(ds.records.size()));
  write_pod(os, static_cast<std::uint32_t>(ds.keypoints));
  write_pod(os, ds.config_hash);
  write_pod(os, ds.seed);
  for (const auto& r : ds.records) {
    for (const auto& p : r.s.points) write_doubles(os, p.data(), 3);
    write_doubles(os, r.a.left.data(), 3);
    write_doubles(os, r.a.right.data(), 3);
    for (const auto& p : r.s_next.points) write_doubles(os, p.data(), 3);
  }
}

inline TransitionDataset read_dataset(std::istream& is) {
  using namespace detail;
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is) throw FormatError("truncated file while reading magic");
  if (std::memcmp(magic, kDataMagic, sizeof(magic)) != 0) throw FormatError("not a dataset file (bad magic)");
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kDataVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
  TransitionDataset ds;
  const auto count = read_pod<std::uint64_t>(is, "count");
  const auto m = read_pod<std::uint32_t>(is, "keypoint count");
  if (m < 3 || m > 1024) throw FormatError("implausible keypoint count " + std::to_string(m));
  ds.keypoints = static_cast<int>(m);
  ds.config_hash = read_pod<std::uint64_t>(is, "config hash");
  ds.seed = read_pod<std::uint64_t>(is, "seed");
  if (count > (1ull << 32)) throw FormatError("implausible record count");
  ds.records.resize(count);
  for (auto& r : ds.records) {
    r.s.points.resize(m);
    r.s_next.points.resize(m);
    for (auto& p : r.s.points) read_doubles(is, p.data(), 3, "record");
    read_doubles(is, r.a.left.data(), 3, "record");
    read_doubles(is, r.a.right.data(), 3, "record");
    for (auto& p : r.s_next.points) read_doubles(is, p.data(), 3, "record");
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after dataset payload");
  return ds;
}

inline void save_dataset(const TransitionDataset& ds, const std::filesystem::path& path) {
  atomic_write(path, [&](std::ostream& os) { write_dataset(os, ds); }, true);
}

inline TransitionDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ArtifactError("missing dataset file " + path.string());
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// Dynamics models work in a frame attached to the grasped edge: origin at
// its midpoint on the table plane, x along left -> right gripper.

struct EdgeFrame {
  Vec3 origin = Vec3::Zero();
  double c = 1.0, s = 0.0;  // cos/sin of the edge yaw

  static EdgeFrame of(const double* flat) {
    EdgeFrame f;
    const Vec3 l(flat[0], flat[1], flat[2]);
    const Vec3 r(flat[3], flat[4], flat[5]);
    f.origin = Vec3(0.5 * (l.x() + r.x()), 0.5 * (l.y() + r.y()), 0.0);
    const double yaw = std::atan2(r.y() - l.y(), r.x() - l.x());
    f.c = std::cos(yaw);
    f.s = std::sin(yaw);
    return f;
  }

  Vec3 vec_in(const Vec3& v) const { return {c * v.x() + s * v.y(), -s * v.x() + c * v.y(), v.z()}; }
  Vec3 vec_out(const Vec3& v) const { return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()}; }
  Vec3 point_in(const Vec3& p) const { return vec_in(p - origin); }
};

namespace detail {

inline Vec3 at(const double* flat, int i) { return {flat[3 * i], flat[3 * i + 1], flat[3 * i + 2]}; }

inline void put(double* flat, int i, const Vec3& v) {
  flat[3 * i] = v.x();
  flat[3 * i + 1] = v.y();
  flat[3 * i + 2] = v.z();
}

}  // namespace detail

struct ForwardModel {
  DenseNetwork net;
  double floor_z = 0.0;  // predicted keypoints are kept above the table

  int keypoints() const { return net.output_size() / 3; }

  // Columns: states (3M x n), actions (6 x n).
  static Eigen::MatrixXd features(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
    const auto m = static_cast<int>(states.rows() / 3);
    Eigen::MatrixXd x(states.rows() + 6, states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const double* s = states.col(j).data();
      const EdgeFrame f = EdgeFrame::of(s);
      double* out = x.col(j).data();
      for (int i = 0; i < m; ++i) detail::put(out, i, f.point_in(detail::at(s, i)));
      const double* a = actions.col(j).data();
      detail::put(out, m, f.vec_in(detail::at(a, 0)));
      detail::put(out, m + 1, f.vec_in(detail::at(a, 1)));
    }
    return x;
  }

  static Eigen::MatrixXd targets(const Eigen::MatrixXd& states, const Eigen::MatrixXd& next) {
    const auto m = static_cast<int>(states.rows() / 3);
    Eigen::MatrixXd y(states.rows(), states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const EdgeFrame f = EdgeFrame::of(states.col(j).data());
      for (int i = 0; i < m; ++i) {
        detail::put(y.col(j).data(), i,
                    f.vec_in(detail::at(next.col(j).data(), i) - detail::at(states.col(j).data(), i)));
      }
    }
    return y;
  }

  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
    const Eigen::MatrixXd delta = net.forward_batch(features(states, actions));
    const int m = keypoints();
    Eigen::MatrixXd next(states.rows(), states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const double* s = states.col(j).data();
      const EdgeFrame f = EdgeFrame::of(s);
      for (int i = 0; i < m; ++i) {
        Vec3 p = detail::at(s, i) + f.vec_out(detail::at(delta.col(j).data(), i));
        p.z() = std::max(p.z(), floor_z);
        detail::put(next.col(j).data(), i, p);
      }
    }
    return next;
  }

  KeypointState predict(const KeypointState& s, const BimanualAction& a) const {
    return KeypointState::from_flat(predict_batch(s.flat(), a.flat()).col(0));
  }
};

struct InverseModel {
  DenseNetwork net;

  static Eigen::MatrixXd features(const Eigen::MatrixXd& states, const Eigen::MatrixXd& next) {
    const auto m = static_cast<int>(states.rows() / 3);
    Eigen::MatrixXd x(2 * states.rows(), states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const double* s = states.col(j).data();
      const double* t = next.col(j).data();
      const EdgeFrame f = EdgeFrame::of(s);
      double* out = x.col(j).data();
      for (int i = 0; i < m; ++i) {
        detail::put(out, i, f.point_in(detail::at(s, i)));
        detail::put(out, m + i, f.point_in(detail::at(t, i)));
      }
    }
    return x;
  }

  static Eigen::MatrixXd targets(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) {
    Eigen::MatrixXd y(6, states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const EdgeFrame f = EdgeFrame::of(states.col(j).data());
      detail::put(y.col(j).data(), 0, f.vec_in(detail::at(actions.col(j).data(), 0)));
      detail::put(y.col(j).data(), 1, f.vec_in(detail::at(actions.col(j).data(), 1)));
    }
    return y;
  }

  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& next) const {
    const Eigen::MatrixXd local = net.forward_batch(features(states, next));
    Eigen::MatrixXd a(6, states.cols());
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
      const EdgeFrame f = EdgeFrame::of(states.col(j).data());
      detail::put(a.col(j).data(), 0, f.vec_out(detail::at(local.col(j).data(), 0)));
      detail::put(a.col(j).data(), 1, f.vec_out(detail::at(local.col(j).data(), 1)));
    }
    return a;
  }

  BimanualAction predict(const KeypointState& s, const KeypointState& s_next) const {
    return BimanualAction::from_flat(predict_batch(s.flat(), s_next.flat()).col(0));
  }
};

// Maps (source, target) to a rigid transform. The network sees both sets
// centred on the source centroid c and outputs z-y-x Euler angles plus the
// translation T_c of the centred problem; T = T_c + c - R c.
struct RegistrationModel {
  DenseNetwork net;

  static Eigen::MatrixXd features(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) {
    const auto m = src.rows() / 3;
    Eigen::MatrixXd x(2 * src.rows(), src.cols());
    for (Eigen::Index j = 0; j < src.cols(); ++j) {
      const Vec3 c = src.col(j).reshaped(3, m).rowwise().mean();
      x.col(j).head(src.rows()) = (src.col(j).reshaped(3, m).colwise() - c).reshaped();
      x.col(j).tail(src.rows()) = (tgt.col(j).reshaped(3, m).colwise() - c).reshaped();
    }
    return x;
  }

  // Rows: yaw, pitch, roll, T_c.
  Eigen::MatrixXd raw_batch(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt) const {
    return net.forward_batch(features(src, tgt));
  }

  // |T|_1 + w_R |euler|_1 for each column pair.
  Eigen::VectorXd distance_batch(const Eigen::MatrixXd& src, const Eigen::MatrixXd& tgt, double w_r) const {
    const Eigen::MatrixXd y = raw_batch(src, tgt);
    const auto m = src.rows() / 3;
    Eigen::VectorXd d(src.cols());
    for (Eigen::Index j = 0; j < src.cols(); ++j) {
      const EulerZYX e{y(0, j), y(1, j), y(2, j)};
      const Vec3 c = src.col(j).reshaped(3, m).rowwise().mean();
      const Vec3 t = Vec3(y(3, j), y(4, j), y(5, j)) + c - e.matrix() * c;
      d[j] = t.cwiseAbs().sum() + w_r * e.abs_sum();
    }
    return d;
  }

  RigidTransform predict(const KeypointState& src, const KeypointState& tgt) const {
    const Eigen::VectorXd y = raw_batch(src.flat(), tgt.flat()).col(0);
    const EulerZYX e{y[0], y[1], y[2]};
    const Vec3 c = src.centroid();
    RigidTransform tf;
    tf.rotation = e.matrix();
    tf.translation = Vec3(y[3], y[4], y[5]) + c - tf.rotation * c;
    return tf;
  }
};

// Mean over keypoints and batch of |R (s - c) + T_c - (t - c)|^2 / 3, with
// R rebuilt from the predicted Euler angles.
struct RegistrationLoss {
  const Eigen::MatrixXd* inputs;  // RegistrationModel::features

  double operator()(const Eigen::MatrixXd& y, std::span<const Eigen::Index> ids, Eigen::MatrixXd* d_y) const {
    const Eigen::Index half = inputs->rows() / 2;
    const Eigen::Index m = half / 3;
    const double denom = static_cast<double>(3 * m * y.cols());
    if (d_y) d_y->setZero(6, y.cols());
    double total = 0.0;
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      const auto x = inputs->col(ids[static_cast<std::size_t>(j)]);
      const EulerZYX e{y(0, j), y(1, j), y(2, j)};
      const Mat3 r = e.matrix();
      const Vec3 tc(y(3, j), y(4, j), y(5, j));
      std::array<Mat3, 3> dr{};
      if (d_y) dr = euler_zyx_jacobian(e.yaw, e.pitch, e.roll);
      for (Eigen::Index i = 0; i < m; ++i) {
        const Vec3 s = x.segment<3>(3 * i);
        const Vec3 t = x.segment<3>(half + 3 * i);
        const Vec3 res = r * s + tc - t;
        total += res.squaredNorm();
        if (d_y) {
          const Vec3 g = (2.0 / denom) * res;
          for (int k = 0; k < 3; ++k) (*d_y)(k, j) += g.dot(dr[k] * s);
          d_y->col(j).tail<3>() += g;
        }
      }
    }
    return total / denom;
  }
};

struct RegistrationPairs {
  Eigen::MatrixXd src;  // 3M x n
  Eigen::MatrixXd tgt;
};

struct PairConfig {
  int count = 20000;
  double offset = 0.08;         // xy centroid jitter of re-placed sources (m)
  double self_fraction = 0.15;  // identical source/target
  double local_fraction = 0.2;  // nearby targets translated a little
};

// Sources are dataset states re-placed near a target. Targets come from
// `targets` (a demonstration) or, when empty, from the dataset itself.
inline RegistrationPairs make_registration_pairs(const TransitionDataset& ds, std::span<const KeypointState> targets,
                                                 const PairConfig& cfg, Rng& rng) {
  if (ds.records.empty()) throw std::invalid_argument("registration pairs: empty dataset");
  const int m = ds.keypoints;
  RegistrationPairs p{Eigen::MatrixXd(3 * m, cfg.count), Eigen::MatrixXd(3 * m, cfg.count)};
  std::uniform_int_distribution<std::size_t> pick_rec(0, ds.records.size() - 1);
  auto dataset_state = [&]() -> const KeypointState& {
    const auto& r = ds.records[pick_rec(rng)];
    return std::uniform_int_distribution<int>(0, 1)(rng) ? r.s_next : r.s;
  };
  auto pick_target = [&](std::size_t* idx) -> KeypointState {
    if (targets.empty()) return dataset_state();
    *idx = std::uniform_int_distribution<std::size_t>(0, targets.size() - 1)(rng);
    return targets[*idx];
  };
  auto shift = [](KeypointState s, const Vec3& d) {
    for (auto& q : s.points) q += d;
    return s;
  };
  for (int j = 0; j < cfg.count; ++j) {
    const double u = uniform(rng, 0.0, 1.0);
    std::size_t ti = 0;
    const KeypointState tgt = pick_target(&ti);
    KeypointState src;
    if (u < cfg.self_fraction) {
      src = tgt;
    } else if (u < cfg.self_fraction + cfg.local_fraction) {
      KeypointState base = tgt;
      if (!targets.empty()) {
        const long lo = std::max<long>(0, static_cast<long>(ti) - 2);
        const long hi = std::min<long>(static_cast<long>(targets.size()) - 1, static_cast<long>(ti) + 1);
        base = targets[static_cast<std::size_t>(std::uniform_int_distribution<long>(lo, hi)(rng))];
      }
      const double r = 0.5 * cfg.offset;
      src = shift(base, Vec3(uniform(rng, -r, r), uniform(rng, -r, r), 0.0));
    } else {
      const KeypointState& d = dataset_state();
      const Vec3 c = tgt.centroid() - d.centroid();
      src = shift(d, Vec3(c.x() + uniform(rng, -cfg.offset, cfg.offset),
                          c.y() + uniform(rng, -cfg.offset, cfg.offset), 0.0));
    }
    p.src.col(j) = src.flat();
    p.tgt.col(j) = tgt.flat();
  }
  return p;
}

// Kabsch solution expressed as the centred network output.
inline Eigen::VectorXd kabsch_label(const KeypointState& src, const KeypointState& tgt) {
  const RigidTransform tf = kabsch_align(src, tgt).transform;
  const EulerZYX e = tf.euler();
  const Vec3 c = src.centroid();
  const Vec3 tc = tf.translation - c + tf.rotation * c;
  Eigen::VectorXd y(6);
  y << e.yaw, e.pitch, e.roll, tc;
  return y;
}

inline TrainReport train_registration_pairs(RegistrationModel& model, const RegistrationPairs& pairs,
                                            const TrainConfig& cfg, bool refit_output_scale = true) {
  const Eigen::MatrixXd x = RegistrationModel::features(pairs.src, pairs.tgt);
  if (refit_output_scale) {
    Eigen::MatrixXd labels(6, pairs.src.cols());
    for (Eigen::Index j = 0; j < pairs.src.cols(); ++j) {
      labels.col(j) = kabsch_label(KeypointState::from_flat(pairs.src.col(j)), KeypointState::from_flat(pairs.tgt.col(j)));
    }
    model.net.output_norm = Normalizer::fit(labels);
    model.net.output_norm.mean.setZero();
  }
  TrainConfig c = cfg;
  c.fit_input_normalization = refit_output_scale;
  return train_with_loss(model.net, x, RegistrationLoss{&x}, c);
}

// ---------------------------------------------------------------------------

struct PriorModels {
  ForwardModel forward;
  InverseModel inverse;
  RegistrationModel registration;

  int keypoints() const { return forward.keypoints(); }

  void save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    fabimit::save(forward.net, dir / "forward.net");
    fabimit::save(inverse.net, dir / "inverse.net");
    fabimit::save(registration.net, dir / "registration.net");
  }

  static PriorModels load(const std::filesystem::path& dir) {
    PriorModels p;
    p.forward.net = fabimit::load(dir / "forward.net");
    p.inverse.net = fabimit::load(dir / "inverse.net");
    p.registration.net = fabimit::load(dir / "registration.net");
    const int m = p.forward.net.output_size();
    if (p.forward.net.input_size() != m + 6 || p.inverse.net.input_size() != 2 * m ||
        p.inverse.net.output_size() != 6 || p.registration.net.input_size() != 2 * m ||
        p.registration.net.output_size() != 6) {
      throw FormatError("model files in " + dir.string() + " have inconsistent dimensions");
    }
    return p;
  }
};

struct PriorTrainConfig {
  TrainConfig train;
  int hidden = 256;
  int depth = 2;
  PairConfig pairs;
  std::uint64_t config_hash = 0;
};

inline void dataset_matrices(const TransitionDataset& ds, Eigen::MatrixXd& s, Eigen::MatrixXd& a, Eigen::MatrixXd& s_next) {
  const auto n = static_cast<Eigen::Index>(ds.records.size());
  s.resize(3 * ds.keypoints, n);
  s_next.resize(3 * ds.keypoints, n);
  a.resize(6, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& r = ds.records[static_cast<std::size_t>(j)];
    s.col(j) = r.s.flat();
    a.col(j) = r.a.flat();
    s_next.col(j) = r.s_next.flat();
  }
}

inline constexpr std::size_t kMinTrainingRecords = 1000;

inline void check_trainable(const TransitionDataset& ds) {
  if (ds.records.size() < kMinTrainingRecords) {
    throw ConfigError("train: dataset has " + std::to_string(ds.records.size()) + " records, need at least " +
                      std::to_string(kMinTrainingRecords));
  }
}

inline TrainReport train_forward(ForwardModel& model, const TransitionDataset& ds, const PriorTrainConfig& cfg) {
  check_trainable(ds);
  Eigen::MatrixXd s, a, s_next;
  dataset_matrices(ds, s, a, s_next);
  const int m = ds.keypoints;
  model.net = DenseNetwork::mlp(3 * m + 6, 3 * m, cfg.train.seed, cfg.hidden, cfg.depth);
  model.net.tag = "forward";
  model.net.config_hash = cfg.config_hash;
  return train(model.net, ForwardModel::features(s, a), ForwardModel::targets(s, s_next), cfg.train);
}

inline TrainReport train_inverse(InverseModel& model, const TransitionDataset& ds, const PriorTrainConfig& cfg) {
  check_trainable(ds);
  Eigen::MatrixXd s, a, s_next;
  dataset_matrices(ds, s, a, s_next);
  const int m = ds.keypoints;
  model.net = DenseNetwork::mlp(6 * m, 6, cfg.train.seed + 1, cfg.hidden, cfg.depth);
  model.net.tag = "inverse";
  model.net.config_hash = cfg.config_hash;
  return train(model.net, InverseModel::features(s, s_next), InverseModel::targets(s, a), cfg.train);
}

// Trains from scratch unless `warm` is set, in which case the existing
// weights and normalisation are fine-tuned on pairs targeting `targets`.
inline TrainReport train_registration(RegistrationModel& model, const TransitionDataset& ds,
                                      std::span<const KeypointState> targets, const PriorTrainConfig& cfg,
                                      bool warm = false) {
  Rng rng(derive_seed(cfg.train.seed, 7));
  const RegistrationPairs pairs = make_registration_pairs(ds, targets, cfg.pairs, rng);
  if (!warm) {
    const int m = ds.keypoints;
    model.net = DenseNetwork::mlp(6 * m, 6, cfg.train.seed + 2, cfg.hidden, cfg.depth);
    model.net.tag = "registration zyx";
    model.net.config_hash = cfg.config_hash;
  }
  return train_registration_pairs(model, pairs, cfg.train, !warm);
}

}  // namespace fabimit
