#include <gtest/gtest.h>

#include "fabimit/priors.hpp"
#include "fabimit/registration.hpp"

using namespace fabimit;

namespace {

KeypointState random_state(Rng& rng) {
  KeypointState s;
  s.points = {Vec3(-0.15, 0, 0), Vec3(0.15, 0, 0), Vec3(-0.15, 0.3, 0), Vec3(0.15, 0.3, 0)};
  for (auto& p : s.points) p += Vec3(uniform(rng, -0.04, 0.04), uniform(rng, -0.04, 0.04), uniform(rng, 0, 0.1));
  const Mat3 r = rot_z(uniform(rng, -0.5, 0.5));
  const Vec3 t(uniform(rng, -0.1, 0.1), uniform(rng, -0.2, 0.1), 0);
  for (auto& p : s.points) p = r * p + t;
  return s;
}

KeypointState transformed(const KeypointState& s, const Mat3& r, const Vec3& t) {
  KeypointState o = s;
  for (auto& p : o.points) p = r * p + t;
  return o;
}

Mat3 random_rotation(Rng& rng) {
  return EulerZYX{uniform(rng, -kPi, kPi), uniform(rng, -1.4, 1.4), uniform(rng, -kPi, kPi)}.matrix();
}

// Registration net trained on synthetic identical and pure-translation pairs.
struct SyntheticRegistration {
  RegistrationModel model;

  static Vec3 offset(Rng& rng) { return Vec3(uniform(rng, -0.06, 0.06), uniform(rng, -0.06, 0.06), uniform(rng, -0.02, 0.02)); }

  static RegistrationPairs pairs(int n, Rng& rng) {
    RegistrationPairs p{Eigen::MatrixXd(12, n), Eigen::MatrixXd(12, n)};
    for (int j = 0; j < n; ++j) {
      const KeypointState s = random_state(rng);
      const Vec3 t = uniform(rng, 0, 1) < 0.3 ? Vec3::Zero() : offset(rng);
      p.src.col(j) = s.flat();
      p.tgt.col(j) = transformed(s, Mat3::Identity(), t).flat();
    }
    return p;
  }

  SyntheticRegistration() {
    Rng rng(21);
    model.net = DenseNetwork::mlp(24, 6, 3, 64, 2);
    TrainConfig cfg;
    cfg.seed = 2;
    cfg.epochs = 60;
    cfg.learning_rate = 3e-3;
    train_registration_pairs(model, pairs(8000, rng), cfg);
  }
};

const SyntheticRegistration& synthetic() {
  static const SyntheticRegistration s;
  return s;
}

}  // namespace

TEST(Kabsch, IdenticalSetsGiveIdentity) {
  Rng rng(1);
  const KeypointState s = random_state(rng);
  const auto k = kabsch_align(s, s);
  EXPECT_FALSE(k.degenerate);
  EXPECT_LT((k.transform.rotation - Mat3::Identity()).norm(), 1e-12);
  EXPECT_LT(k.transform.translation.norm(), 1e-12);
}

TEST(Kabsch, RecoversYawAndTranslation) {
  Rng rng(2);
  const KeypointState s = random_state(rng);
  const Mat3 r = rot_z(kPi / 6);
  const Vec3 t(0.1, 0, 0);
  const auto k = kabsch_align(s, transformed(s, r, t));
  EXPECT_LT((k.transform.rotation - r).norm(), 1e-9);
  EXPECT_LT((k.transform.translation - t).norm(), 1e-9);
  EXPECT_NEAR(k.transform.rotation.determinant(), 1.0, 1e-12);
}

TEST(Kabsch, RecoversRandomRigidTransforms) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const KeypointState s = random_state(rng);
    const Mat3 r = random_rotation(rng);
    const Vec3 t(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const auto k = kabsch_align(s, transformed(s, r, t));
    EXPECT_LT((k.transform.rotation - r).norm(), 1e-9);
    EXPECT_LT((k.transform.translation - t).norm(), 1e-9);
  }
}

TEST(Kabsch, ResidualIsOptimalAgainstRandomTransforms) {
  Rng rng(4);
  const KeypointState s = random_state(rng);
  KeypointState t = transformed(s, rot_z(0.4), Vec3(0.05, -0.02, 0.01));
  for (auto& p : t.points) p += Vec3(uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02), uniform(rng, -0.02, 0.02));
  const auto k = kabsch_align(s, t);
  const double best = registration_residual(s, t, k.transform);
  for (int i = 0; i < 10000; ++i) {
    RigidTransform tf;
    tf.rotation = i % 2 ? random_rotation(rng) : EulerZYX{uniform(rng, 0.3, 0.5), uniform(rng, -0.1, 0.1), uniform(rng, -0.1, 0.1)}.matrix();
    tf.translation = k.transform.translation + Vec3(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
    ASSERT_LE(best, registration_residual(s, t, tf) + 1e-15);
  }
}

TEST(Kabsch, DegenerateInputsAreFlagged) {
  KeypointState a, b;
  a.points = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
  b.points = {Vec3(0, 1, 0), Vec3(1, 1, 0)};
  EXPECT_TRUE(kabsch_align(a, b).degenerate);
  a.points.push_back(Vec3(2, 0, 0));  // collinear
  b.points.push_back(Vec3(2, 1, 0));
  const auto k = kabsch_align(a, b);
  EXPECT_TRUE(k.degenerate);
  EXPECT_LT((k.transform.translation - Vec3(0, 1, 0)).norm(), 1e-12);
  KeypointState c;
  c.points = {Vec3::Zero()};
  EXPECT_THROW(kabsch_align(a, c), std::invalid_argument);
}

TEST(RegistrationLoss, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  RegistrationPairs p = SyntheticRegistration::pairs(4, rng);
  const Eigen::MatrixXd x = RegistrationModel::features(p.src, p.tgt);
  const RegistrationLoss loss{&x};
  Eigen::MatrixXd y(6, 4);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = uniform(rng, -0.5, 0.5);
  const std::vector<Eigen::Index> ids{0, 1, 2, 3};
  Eigen::MatrixXd dy;
  loss(y, ids, &dy);
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    Eigen::MatrixXd up = y, down = y;
    up.data()[i] += h;
    down.data()[i] -= h;
    const double fd = (loss(up, ids, nullptr) - loss(down, ids, nullptr)) / (2 * h);
    EXPECT_NEAR(dy.data()[i], fd, 1e-7 + 1e-5 * std::abs(fd));
  }
}

TEST(RegistrationLoss, KabschResidualBoundsLearnedLoss) {
  const auto& reg = synthetic();
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    const KeypointState s = random_state(rng);
    const KeypointState t = transformed(random_state(rng), Mat3::Identity(), Vec3::Zero());
    const Eigen::MatrixXd x = RegistrationModel::features(s.flat(), t.flat());
    const double learned = RegistrationLoss{&x}(reg.model.raw_batch(s.flat(), t.flat()), std::vector<Eigen::Index>{0}, nullptr);
    const double oracle = registration_residual(s, t, kabsch_align(s, t).transform) / 12.0;
    EXPECT_LE(oracle, learned + 1e-12);
  }
}

TEST(RegistrationModel, IdenticalPairsGiveNearIdentity) {
  const auto& reg = synthetic();
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const KeypointState s = random_state(rng);
    const RigidTransform tf = reg.model.predict(s, s);
    EXPECT_LT(tf.translation.norm(), 0.003);  // 1% of the fabric edge
    EXPECT_LT(tf.euler().abs_sum(), 0.05);
  }
}

TEST(RegistrationModel, PureTranslationsAreRecovered) {
  const auto& reg = synthetic();
  Rng rng(8);
  int within = 0, total = 0;
  for (int i = 0; i < 200; ++i) {
    const KeypointState s = random_state(rng);
    const Vec3 t = SyntheticRegistration::offset(rng);
    if (t.norm() < 0.02) continue;
    const RigidTransform tf = reg.model.predict(s, transformed(s, Mat3::Identity(), t));
    ++total;
    within += (tf.translation - t).norm() <= 0.1 * t.norm();
  }
  EXPECT_GE(within, total * 95 / 100) << within << "/" << total;
}
