#pragma once

// Safe sampling-based MPC: inverse-dynamics action prior, CEM over action
// sequences rolled out through the forward model, feasibility filtering by
// the binary cost, and the receding-horizon episode loop with its ablations.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fabimit/action_constraints.hpp"
#include "fabimit/demo_reward.hpp"
#include "fabimit/errors.hpp"
#include "fabimit/fabric_sim.hpp"
#include "fabimit/metrics.hpp"
#include "fabimit/priors.hpp"
#include "fabimit/random.hpp"
#include "fabimit/state_space.hpp"

namespace fabimit {

struct ControlConfig {
  int h = 5;
  int H = 40;
  int n_samples = 200;
  int elite_count = 0;  // 0 means max(1, n_samples / 10)
  double beta = 0.7;
  double gamma = 0.95;
  double sigma_init = 0.02 * 0.02;
  double tau_conv = 0.005 * 0.005;
  int max_iterations = 8;

  int elites() const { return elite_count > 0 ? elite_count : std::max(1, n_samples / 10); }

  void validate() const {
    if (h <= 0 || H < 0 || n_samples <= 0 || max_iterations <= 0) {
      throw ConfigError("control: h, n_samples, max_iterations must be positive and H non-negative");
    }
    if (H > 0 && h > H) throw ConfigError("control: h must not exceed H");
    if (elites() > n_samples) throw ConfigError("control: elite_count exceeds n_samples");
    if (!(beta > 0 && beta <= 1)) throw ConfigError("control: beta must lie in (0,1]");
    if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("control: gamma must lie in [0,1]");
    if (!(sigma_init >= 0) || !(tau_conv >= 0)) throw ConfigError("control: variances must be non-negative");
  }
};

enum class PlannerMode { kFull, kNoMpc, kNoPrior, kNoCost, kOracle };

inline std::string to_string(PlannerMode m) {
  switch (m) {
    case PlannerMode::kFull: return "full";
    case PlannerMode::kNoMpc: return "no-mpc";
    case PlannerMode::kNoPrior: return "no-prior";
    case PlannerMode::kNoCost: return "no-cost";
    case PlannerMode::kOracle: return "oracle";
  }
  return "?";
}

inline PlannerMode planner_from_string(const std::string& s) {
  for (auto m : {PlannerMode::kFull, PlannerMode::kNoMpc, PlannerMode::kNoPrior, PlannerMode::kNoCost,
                 PlannerMode::kOracle}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown planner mode '" + s + "'");
}

struct ActionSequence {
  std::vector<BimanualAction> actions;

  Eigen::VectorXd flat() const {
    Eigen::VectorXd v(6 * static_cast<Eigen::Index>(actions.size()));
    for (std::size_t k = 0; k < actions.size(); ++k) v.segment<6>(6 * static_cast<Eigen::Index>(k)) = actions[k].flat();
    return v;
  }
  static ActionSequence from_flat(const Eigen::Ref<const Eigen::VectorXd>& v) {
    ActionSequence s;
    for (Eigen::Index k = 0; k + 6 <= v.size(); k += 6) s.actions.push_back(BimanualAction::from_flat(v.segment<6>(k)));
    return s;
  }
};

// Everything a planner needs, borrowed.
struct Planner {
  const PriorModels* models = nullptr;
  const AlignmentReward* reward = nullptr;
  const RigidScene* scene = nullptr;
  ConstraintConfig constraints;
  ControlConfig control;
};

inline BimanualAction clamp_action(const BimanualAction& a, double a_max) { return a.clamped(a_max); }

// Alternates inverse dynamics toward the subgoal with forward prediction.
inline ActionSequence action_prior(const KeypointState& s, const Planner& p, int h) {
  ActionSequence seq;
  KeypointState cur = s;
  for (int k = 0; k < h; ++k) {
    const KeypointState& goal = p.reward->subgoal(cur);
    BimanualAction a = p.models->inverse.predict(cur, goal);
    if (!a.all_finite()) a = {};
    a = clamp_action(a, p.constraints.a_max);
    seq.actions.push_back(a);
    cur = p.models->forward.predict(cur, a);
  }
  return seq;
}

struct SequenceScores {
  Eigen::VectorXd reward;
  Eigen::VectorXi cost;
};

// Rolls every column of `x` (6h x n) forward from `s` through f_D. A rollout
// whose predicted state trips the termination classifier stops there: later
// actions would never be executed, so they add no cost and the terminal
// reward is held for the remaining steps.
inline SequenceScores evaluate_sequences(const KeypointState& s, const Eigen::MatrixXd& x, const Planner& p) {
  const Eigen::Index n = x.cols();
  const int h = static_cast<int>(x.rows() / 6);
  SequenceScores out{Eigen::VectorXd::Zero(n), Eigen::VectorXi::Zero(n)};
  Eigen::MatrixXd states = s.flat().replicate(1, n);
  std::vector<char> done(static_cast<std::size_t>(n), 0);
  Eigen::VectorXd held = Eigen::VectorXd::Zero(n);
  double discount = 1.0;
  for (int k = 0; k < h; ++k) {
    const Eigen::MatrixXd a = x.middleRows(6 * k, 6);
    Eigen::MatrixXd next = p.models->forward.predict_batch(states, a);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (done[static_cast<std::size_t>(j)]) next.col(j) = states.col(j);
    }
    const Eigen::VectorXd r = p.reward->reward_batch(next);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (done[static_cast<std::size_t>(j)]) {
        out.reward[j] += discount * held[j];
        continue;
      }
      if (!std::isfinite(r[j])) {
        out.cost[j] += 1;
        out.reward[j] = -std::numeric_limits<double>::infinity();
        done[static_cast<std::size_t>(j)] = 1;
        held[j] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const KeypointState sj = KeypointState::from_flat(states.col(j));
      const KeypointState nj = KeypointState::from_flat(next.col(j));
      const BimanualAction aj = BimanualAction::from_flat(a.col(j));
      out.cost[j] += cost(sj, aj, nj, *p.scene, p.constraints).cost;
      out.reward[j] += discount * r[j];
      if (p.reward->terminated(nj)) {
        done[static_cast<std::size_t>(j)] = 1;
        held[j] = r[j];
      }
    }
    states = std::move(next);
    discount *= p.control.gamma;
  }
  return out;
}

inline std::pair<double, int> evaluate_sequence(const KeypointState& s, const ActionSequence& seq, const Planner& p) {
  const SequenceScores sc = evaluate_sequences(s, seq.flat(), p);
  return {sc.reward[0], sc.cost[0]};
}

// Candidates with finite reward (and cost 0 when filtering), best first.
// Ties keep sample order.
inline std::vector<Eigen::Index> rank_candidates(const SequenceScores& sc, bool filter) {
  std::vector<Eigen::Index> pool;
  for (Eigen::Index j = 0; j < sc.reward.size(); ++j) {
    if (!std::isfinite(sc.reward[j])) continue;
    if (!filter || sc.cost[j] == 0) pool.push_back(j);
  }
  std::stable_sort(pool.begin(), pool.end(), [&](Eigen::Index a, Eigen::Index b) { return sc.reward[a] > sc.reward[b]; });
  return pool;
}

struct IterationTelemetry {
  int iteration = 0;
  double best_reward = 0.0;        // best feasible so far (-inf when none)
  double mean_elite_reward = 0.0;  // NaN when no elites
  double feasible_fraction = 0.0;
  double max_sigma = 0.0;          // after the update
};

struct PlanResult {
  std::optional<BimanualAction> action;
  ActionSequence best;
  double best_reward = -std::numeric_limits<double>::infinity();
  int best_cost = 0;
  bool converged = false;
  ActionSequence prior;
  std::vector<IterationTelemetry> telemetry;
  Eigen::VectorXd mu;
  Eigen::VectorXd sigma;
};

// `use_prior` false iterates from a zero prior; `filter` false ranks all
// samples by reward regardless of cost.
inline PlanResult cem_plan(const KeypointState& s, const Planner& p, Rng& rng, bool use_prior = true,
                           bool filter = true) {
  const ControlConfig& c = p.control;
  const int dim = 6 * c.h;
  const double a_max = p.constraints.a_max;
  PlanResult res;
  res.prior = use_prior ? action_prior(s, p, c.h) : ActionSequence{std::vector<BimanualAction>(c.h)};
  const Eigen::VectorXd prior = res.prior.flat();
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sigma = Eigen::VectorXd::Constant(dim, c.sigma_init);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd best_flat;

  for (int it = 0; it < c.max_iterations; ++it) {
    Eigen::MatrixXd eps(dim, c.n_samples);
    for (Eigen::Index j = 0; j < eps.cols(); ++j)
      for (Eigen::Index i = 0; i < dim; ++i) eps(i, j) = normal(rng);
    eps = (eps.array().colwise() * sigma.array().sqrt()).matrix().colwise() + mu;
    eps.col(0) = mu;  // the current mean is always a candidate
    const Eigen::MatrixXd x = (eps.colwise() + prior).cwiseMax(-a_max).cwiseMin(a_max);
    const SequenceScores sc = evaluate_sequences(s, x, p);

    const std::vector<Eigen::Index> pool = rank_candidates(sc, filter);

    IterationTelemetry tel;
    tel.iteration = it;
    int feasible = 0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) feasible += sc.cost[j] == 0 ? 1 : 0;
    tel.feasible_fraction = static_cast<double>(feasible) / static_cast<double>(x.cols());
    tel.mean_elite_reward = std::numeric_limits<double>::quiet_NaN();

    if (!pool.empty()) {
      const Eigen::Index top = pool.front();
      if (sc.reward[top] > res.best_reward) {
        res.best_reward = sc.reward[top];
        res.best_cost = sc.cost[top];
        best_flat = x.col(top);
      }
      const std::size_t ne = std::min<std::size_t>(static_cast<std::size_t>(c.elites()), pool.size());
      Eigen::MatrixXd el(dim, static_cast<Eigen::Index>(ne));
      double mean_r = 0.0;
      for (std::size_t e = 0; e < ne; ++e) {
        el.col(static_cast<Eigen::Index>(e)) = eps.col(pool[e]);
        mean_r += sc.reward[pool[e]];
      }
      tel.mean_elite_reward = mean_r / static_cast<double>(ne);
      const Eigen::VectorXd mu_v = el.rowwise().mean();
      const Eigen::VectorXd var_v = (el.colwise() - mu_v).array().square().rowwise().mean();
      mu = (1.0 - c.beta) * mu + c.beta * mu_v;
      sigma = (1.0 - c.beta) * sigma + c.beta * var_v;
    }
    tel.best_reward = res.best_reward;
    tel.max_sigma = sigma.maxCoeff();
    res.telemetry.push_back(tel);
    if (best_flat.size() > 0 && sigma.maxCoeff() < c.tau_conv) {
      res.converged = true;
      break;
    }
  }
  res.mu = mu;
  res.sigma = sigma;
  if (best_flat.size() > 0) {
    res.best = ActionSequence::from_flat(best_flat);
    res.action = res.best.actions.front();
  }
  return res;
}

// ---------------------------------------------------------------------------

enum class Termination { kSuccessClassifier, kExhaustedSteps, kNoFeasibleAction };

inline std::string to_string(Termination t) {
  switch (t) {
    case Termination::kSuccessClassifier: return "terminated-success-classifier";
    case Termination::kExhaustedSteps: return "exhausted-steps";
    case Termination::kNoFeasibleAction: return "no-feasible-action";
  }
  return "?";
}

struct StepRecord {
  BimanualAction action;
  std::array<Vec3, 2> anchors{Vec3::Zero(), Vec3::Zero()};  // after the action
  KeypointState state;       // after the action (true simulator)
  KeypointState predicted;   // f_D prediction the planner accepted
  int predicted_cost = 0;    // sampling-time recheck
  int audit_cost = 0;        // recheck on the true next state
  std::uint8_t audit_rules = 0;
  int progress = 0;
  double reward = 0.0;       // R_E of the true next state
  double chamfer = 0.0;      // to the demo-final cloud
  double plan_seconds = 0.0;
};

struct EpisodeResult {
  PlannerMode mode = PlannerMode::kFull;
  Termination reason = Termination::kExhaustedSteps;
  int steps = 0;
  bool success = false;
  KeypointState initial;
  std::vector<StepRecord> trace;
  double initial_chamfer = 0.0;
  double final_chamfer = 0.0;   // released and settled fabric vs demo-final cloud
  double final_iou = 0.0;       // last grasped keypoints vs demo-final keypoints
  int audit_violations = 0;
  std::vector<std::vector<IterationTelemetry>> telemetry;  // per step
};

struct EpisodeConfig {
  SimConfig sim;
  ConstraintConfig constraints;
  ControlConfig control;
  RewardConfig reward;
  KeypointLayout layout;
  int cloud_points = 200;
};

// Receding horizon: plan, check the chosen action against the predicted
// next state, execute the first action, audit against the true state.
// `oracle` supplies actions for PlannerMode::kOracle.
inline EpisodeResult run_episode(SimState st, const Demonstration& demo, const PriorModels& models, const EpisodeConfig& cfg, PlannerMode mode,
                                 std::uint64_t seed, const std::vector<BimanualAction>* oracle = nullptr) {
  cfg.control.validate();
  if (mode == PlannerMode::kOracle && !oracle) throw std::invalid_argument("run_episode: oracle mode needs actions");
  const AlignmentReward reward(demo, cfg.reward, &models.registration);
  Planner planner{&models, &reward, &st.scene, cfg.constraints, cfg.control};
  Rng rng(seed);
  const PointCloud& demo_cloud = demo.final_cloud;
  if (demo_cloud.points.empty()) throw std::invalid_argument("run_episode: demonstration has no final cloud");

  EpisodeResult out;
  out.mode = mode;
  KeypointState s = extract_keypoints(st, cfg.layout);
  out.initial = s;
  out.initial_chamfer = chamfer(sample_pointcloud(st, cfg.cloud_points), demo_cloud);

  for (;;) {
    if (reward.terminated(s)) {
      out.reason = Termination::kSuccessClassifier;
      break;
    }
    if (out.steps >= cfg.control.H) {
      out.reason = Termination::kExhaustedSteps;
      break;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::optional<BimanualAction> a;
    switch (mode) {
      case PlannerMode::kFull:
      case PlannerMode::kNoPrior:
      case PlannerMode::kNoCost: {
        const PlanResult pr = cem_plan(s, planner, rng, mode != PlannerMode::kNoPrior, mode != PlannerMode::kNoCost);
        out.telemetry.push_back(pr.telemetry);
        a = pr.action;
        break;
      }
      case PlannerMode::kNoMpc: {
        BimanualAction b = models.inverse.predict(s, reward.subgoal(s));
        if (b.all_finite()) a = clamp_action(b, cfg.constraints.a_max);
        break;
      }
      case PlannerMode::kOracle:
        if (static_cast<std::size_t>(out.steps) < oracle->size()) a = (*oracle)[static_cast<std::size_t>(out.steps)];
        break;
    }
    const double plan_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!a) {
      out.reason = Termination::kNoFeasibleAction;
      break;
    }
    StepRecord rec;
    rec.action = *a;
    rec.plan_seconds = plan_s;
    rec.predicted = models.forward.predict(s, *a);
    rec.predicted_cost = cost(s, *a, rec.predicted, st.scene, cfg.constraints).cost;
    if (rec.predicted_cost != 0 && mode != PlannerMode::kOracle) {
      out.reason = Termination::kNoFeasibleAction;
      break;
    }
    st = step(std::move(st), *a, cfg.sim);
    rec.state = extract_keypoints(st, cfg.layout);
    rec.anchors = st.anchors;
    const CostVerdict audit = cost(s, *a, rec.state, st.scene, cfg.constraints);
    rec.audit_cost = audit.cost;
    rec.audit_rules = audit.violated;
    out.audit_violations += audit.cost;
    rec.progress = reward.progress(rec.state).j;
    rec.reward = reward.reward(rec.state);
    rec.chamfer = chamfer(sample_pointcloud(st, cfg.cloud_points), demo_cloud);
    s = rec.state;
    out.trace.push_back(std::move(rec));
    ++out.steps;
  }

  out.final_iou = polygon_iou(s, demo.final_state()).iou;
  SimState released = release_and_settle(std::move(st), cfg.sim);
  out.success = check_success(released, cfg.sim);
  out.final_chamfer = chamfer(sample_pointcloud(released, cfg.cloud_points), demo_cloud);
  return out;
}

}  // namespace fabimit
