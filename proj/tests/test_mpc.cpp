#include <gtest/gtest.h>

#include "fabimit/mpc_controller.hpp"
#include "support.hpp"

using namespace fabimit;
using fixtures::demo_for;

namespace {

struct BoxPlanning {
  SimState st = init_scenario(default_scenario(ScenarioKind::kBox));
  const Demonstration& demo = demo_for(ScenarioKind::kBox).demo;
  AlignmentReward reward{demo, RewardConfig{}, &fixtures::box_models().registration};
  Planner planner;
  KeypointState s0 = extract_keypoints(st);

  explicit BoxPlanning(ControlConfig c = {}) {
    planner = Planner{&fixtures::box_models(), &reward, &st.scene, ConstraintConfig{}, c};
  }
};

ControlConfig small_control() {
  ControlConfig c;
  c.n_samples = 40;
  c.max_iterations = 3;
  return c;
}

}  // namespace

TEST(ActionPrior, LengthAndDeterminism) {
  BoxPlanning b;
  const ActionSequence a = action_prior(b.s0, b.planner, 5);
  const ActionSequence c = action_prior(b.s0, b.planner, 5);
  ASSERT_EQ(a.actions.size(), 5u);
  for (std::size_t k = 0; k < 5; ++k) {
    EXPECT_EQ(a.actions[k], c.actions[k]);
    EXPECT_LE(a.actions[k].flat().cwiseAbs().maxCoeff(), b.planner.constraints.a_max);
  }
}

TEST(ActionPrior, SingleStepIsInverseDynamicsTowardSubgoal) {
  BoxPlanning b;
  const ActionSequence a = action_prior(b.s0, b.planner, 1);
  const BimanualAction expect =
      fixtures::box_models().inverse.predict(b.s0, b.reward.subgoal(b.s0)).clamped(b.planner.constraints.a_max);
  ASSERT_EQ(a.actions.size(), 1u);
  EXPECT_EQ(a.actions[0], expect);
}

TEST(SequenceScores, ZeroSequenceIsFeasible) {
  BoxPlanning b;
  const auto [reward, cost] = evaluate_sequence(b.s0, ActionSequence{std::vector<BimanualAction>(5)}, b.planner);
  EXPECT_EQ(cost, 0);
  EXPECT_TRUE(std::isfinite(reward));
}

TEST(SequenceScores, InfeasibleSequenceAccumulatesCost) {
  BoxPlanning b;
  // grippers pushed away from the edge direction, outside the cone
  const BimanualAction away{Vec3(0, 0.03, 0), Vec3(0, 0.03, 0)};
  const auto [reward, cost] = evaluate_sequence(b.s0, ActionSequence{std::vector<BimanualAction>(5, away)}, b.planner);
  EXPECT_GE(cost, 1);
  (void)reward;
}

TEST(SequenceScores, ZeroDiscountKeepsFirstStepOnly) {
  ControlConfig c;
  c.gamma = 0.0;
  BoxPlanning b(c);
  const ActionSequence seq = action_prior(b.s0, b.planner, 5);
  const double r0 = b.reward.reward(fixtures::box_models().forward.predict(b.s0, seq.actions[0]));
  EXPECT_NEAR(evaluate_sequence(b.s0, seq, b.planner).first, r0, 1e-12);
}

TEST(SequenceScores, DiscountedSumOfRewards) {
  BoxPlanning b;
  const ActionSequence seq = action_prior(b.s0, b.planner, 5);
  double expect = 0.0, disc = 1.0;
  KeypointState cur = b.s0;
  bool done = false;
  double held = 0.0;
  for (const auto& a : seq.actions) {
    if (!done) {
      cur = fixtures::box_models().forward.predict(cur, a);
      held = b.reward.reward(cur);
      done = b.reward.terminated(cur);
    }
    expect += disc * held;
    disc *= b.planner.control.gamma;
  }
  EXPECT_NEAR(evaluate_sequence(b.s0, seq, b.planner).first, expect, 1e-9);
}

TEST(RankCandidates, FiltersAndOrders) {
  SequenceScores sc{Eigen::VectorXd(5), Eigen::VectorXi(5)};
  sc.reward << 1.0, 3.0, -std::numeric_limits<double>::infinity(), 3.0, 2.0;
  sc.cost << 0, 1, 0, 0, 0;
  EXPECT_EQ(rank_candidates(sc, true), (std::vector<Eigen::Index>{3, 4, 0}));
  EXPECT_EQ(rank_candidates(sc, false), (std::vector<Eigen::Index>{1, 3, 4, 0}));
}

TEST(RankCandidates, InvariantUnderPositiveAffineRescaling) {
  Rng rng(4);
  SequenceScores sc{Eigen::VectorXd(200), Eigen::VectorXi(200)};
  for (int j = 0; j < 200; ++j) {
    sc.reward[j] = uniform(rng, -5, 5);
    sc.cost[j] = uniform(rng, 0, 1) < 0.3 ? 1 : 0;
  }
  SequenceScores scaled = sc;
  scaled.reward = 3.5 * sc.reward.array() + 7.0;
  EXPECT_EQ(rank_candidates(sc, true), rank_candidates(scaled, true));
}

TEST(Cem, FullUpdateMatchesEliteStatistics) {
  ControlConfig c;
  c.beta = 1.0;
  c.max_iterations = 1;
  BoxPlanning b(c);
  Rng rng(12);
  const PlanResult res = cem_plan(b.s0, b.planner, rng);

  // replay the single iteration by hand
  Rng replay(12);
  const int dim = 6 * c.h;
  const Eigen::VectorXd prior = action_prior(b.s0, b.planner, c.h).flat();
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd eps(dim, c.n_samples);
  for (Eigen::Index j = 0; j < eps.cols(); ++j)
    for (Eigen::Index i = 0; i < dim; ++i) eps(i, j) = std::sqrt(c.sigma_init) * normal(replay);
  eps.col(0).setZero();  // the initial mean
  const double a_max = b.planner.constraints.a_max;
  const Eigen::MatrixXd x = (eps.colwise() + prior).cwiseMax(-a_max).cwiseMin(a_max);
  const auto pool = rank_candidates(evaluate_sequences(b.s0, x, b.planner), true);
  ASSERT_GE(pool.size(), 2u);
  const auto ne = static_cast<Eigen::Index>(std::min<std::size_t>(pool.size(), static_cast<std::size_t>(c.elites())));
  Eigen::MatrixXd el(dim, ne);
  for (Eigen::Index e = 0; e < ne; ++e) el.col(e) = eps.col(pool[static_cast<std::size_t>(e)]);
  const Eigen::VectorXd mu = el.rowwise().mean();
  const Eigen::VectorXd var = (el.colwise() - mu).array().square().rowwise().mean();
  EXPECT_LT((res.mu - mu).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((res.sigma - var).cwiseAbs().maxCoeff(), 1e-12);
  ASSERT_TRUE(res.action);
  EXPECT_EQ(*res.action, BimanualAction::from_flat(x.col(pool.front()).head<6>()));
}

TEST(Cem, ZeroVarianceReturnsThePrior) {
  ControlConfig c = small_control();
  c.sigma_init = 0.0;
  BoxPlanning b(c);
  Rng rng(1);
  const PlanResult res = cem_plan(b.s0, b.planner, rng, true, false);
  ASSERT_TRUE(res.action);
  EXPECT_EQ(*res.action, res.prior.actions.front());
  EXPECT_TRUE(res.converged);
}

TEST(Cem, ReturnedActionIsPredictedFeasible) {
  BoxPlanning b(small_control());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const PlanResult res = cem_plan(b.s0, b.planner, rng);
    ASSERT_TRUE(res.action);
    EXPECT_EQ(res.best_cost, 0);
    EXPECT_EQ(evaluate_sequence(b.s0, res.best, b.planner).second, 0);
    EXPECT_FALSE(res.telemetry.empty());
  }
}

TEST(Cem, DeterministicForFixedSeed) {
  BoxPlanning b(small_control());
  Rng r1(8), r2(8);
  const PlanResult a = cem_plan(b.s0, b.planner, r1);
  const PlanResult c = cem_plan(b.s0, b.planner, r2);
  ASSERT_TRUE(a.action && c.action);
  EXPECT_EQ(*a.action, *c.action);
  EXPECT_EQ(a.best_reward, c.best_reward);
}

namespace {

EpisodeConfig episode_config(int horizon) {
  EpisodeConfig e;
  e.control = small_control();
  e.control.H = horizon;
  if (horizon > 0) e.control.h = std::min(e.control.h, horizon);
  return e;
}

}  // namespace

TEST(Episode, ZeroHorizonExhaustsImmediately) {
  const EpisodeResult r = run_episode(init_scenario(default_scenario(ScenarioKind::kBox)),
                                      demo_for(ScenarioKind::kBox).demo, fixtures::box_models(), episode_config(0),
                                      PlannerMode::kFull, 1);
  EXPECT_EQ(r.reason, Termination::kExhaustedSteps);
  EXPECT_EQ(r.steps, 0);
  EXPECT_TRUE(r.trace.empty());
}

TEST(Episode, OracleReplayTerminatesAndSucceeds) {
  for (auto k : {ScenarioKind::kBox, ScenarioKind::kHanger}) {
    const auto& rec = demo_for(k);
    const EpisodeResult r = run_episode(init_scenario(default_scenario(k)), rec.demo, fixtures::box_models(),
                                        episode_config(40), PlannerMode::kOracle, 1, &rec.actions);
    EXPECT_EQ(r.reason, Termination::kSuccessClassifier) << to_string(k);
    EXPECT_EQ(r.steps, static_cast<int>(rec.actions.size()));
    EXPECT_TRUE(r.success);
    EXPECT_LT(r.final_chamfer, 1e-6);
  }
}

TEST(Episode, EveryModeProducesTheSameRecordShape) {
  for (auto mode : {PlannerMode::kFull, PlannerMode::kNoMpc, PlannerMode::kNoPrior, PlannerMode::kNoCost}) {
    const EpisodeResult r = run_episode(init_scenario(default_scenario(ScenarioKind::kBox)),
                                        demo_for(ScenarioKind::kBox).demo, fixtures::box_models(), episode_config(3),
                                        mode, 2);
    EXPECT_EQ(r.mode, mode);
    EXPECT_EQ(static_cast<int>(r.trace.size()), r.steps);
    EXPECT_LE(r.steps, 3);
    EXPECT_TRUE(std::isfinite(r.initial_chamfer));
    EXPECT_TRUE(std::isfinite(r.final_chamfer));
    int audits = 0;
    for (const auto& s : r.trace) {
      EXPECT_EQ(s.state.size(), 4);
      EXPECT_EQ(s.predicted.size(), 4);
      EXPECT_TRUE(std::isfinite(s.reward));
      if (mode != PlannerMode::kNoCost) {
        EXPECT_EQ(s.predicted_cost, 0);
      }
      audits += s.audit_cost;
    }
    EXPECT_EQ(audits, r.audit_violations);
  }
}

TEST(Episode, SameSeedSameEpisode) {
  auto run = [] {
    return run_episode(init_scenario(default_scenario(ScenarioKind::kBox)), demo_for(ScenarioKind::kBox).demo,
                       fixtures::box_models(), episode_config(3), PlannerMode::kFull, 5);
  };
  const EpisodeResult a = run(), b = run();
  ASSERT_EQ(a.steps, b.steps);
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].action, b.trace[i].action);
  EXPECT_EQ(a.final_chamfer, b.final_chamfer);
}

TEST(Episode, OracleModeNeedsActions) {
  EXPECT_THROW(run_episode(init_scenario(default_scenario(ScenarioKind::kBox)), demo_for(ScenarioKind::kBox).demo,
                           fixtures::box_models(), episode_config(3), PlannerMode::kOracle, 1),
               std::invalid_argument);
}

TEST(ControlConfig, Validation) {
  ControlConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.elites(), 20);
  c.h = 50;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.beta = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.elite_count = 500;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(planner_from_string("random"), ConfigError);
  EXPECT_EQ(planner_from_string("no-prior"), PlannerMode::kNoPrior);
}
