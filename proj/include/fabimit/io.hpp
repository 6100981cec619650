#pragma once

// Output artifacts: episode traces (NDJSON), planner telemetry, loss curves,
// run summaries and Chamfer curves. Every file carries the config hash and
// seed that produced it, and is written through a staging file plus rename.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fabimit/atomic_file.hpp"
#include "fabimit/errors.hpp"
#include "fabimit/mpc_controller.hpp"
#include "fabimit/tiny_net.hpp"

namespace fabimit {

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

inline void require_file(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::is_regular_file(p)) throw ArtifactError("missing " + what + ": " + p.string());
}

// ---------------------------------------------------------------------------
// Trace: one JSON object per line. A header, the initial state, one record per
// executed step, then the result.

namespace detail {

inline nlohmann::json to_json(const Vec3& v) { return nlohmann::json::array({v.x(), v.y(), v.z()}); }

inline nlohmann::json to_json(const KeypointState& s) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : s.points) {
    a.push_back(p.x());
    a.push_back(p.y());
    a.push_back(p.z());
  }
  return a;
}

}  // namespace detail

struct TraceInfo {
  std::string scenario;
  int trial = 0;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

inline void write_trace(std::ostream& os, const EpisodeResult& r, const TraceInfo& info) {
  using nlohmann::json;
  json head{{"record", "header"},   {"format", "fabimit-trace"}, {"version", 1},
            {"scenario", info.scenario}, {"mode", to_string(r.mode)}, {"trial", info.trial},
            {"seed", info.seed},         {"config_hash", hex64(info.config_hash)},
            {"keypoints", r.initial.size()}, {"full_mesh", false}};
  os << head.dump() << '\n';
  os << json{{"record", "step"}, {"t", 0}, {"keypoints", detail::to_json(r.initial)},
             {"chamfer", r.initial_chamfer}}.dump()
     << '\n';
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    const StepRecord& s = r.trace[i];
    json j{{"record", "step"},
           {"t", i + 1},
           {"action", {detail::to_json(s.action.left), detail::to_json(s.action.right)}},
           {"anchors", {detail::to_json(s.anchors[0]), detail::to_json(s.anchors[1])}},
           {"keypoints", detail::to_json(s.state)},
           {"predicted", detail::to_json(s.predicted)},
           {"reward", s.reward},
           {"cost", s.predicted_cost},
           {"audit_cost", s.audit_cost},
           {"audit_rules", s.audit_rules},
           {"progress", s.progress},
           {"chamfer", s.chamfer},
           {"plan_seconds", s.plan_seconds}};
    os << j.dump() << '\n';
  }
  os << json{{"record", "result"},
             {"reason", to_string(r.reason)},
             {"steps", r.steps},
             {"success", r.success},
             {"final_chamfer", r.final_chamfer},
             {"final_iou", r.final_iou},
             {"audit_violations", r.audit_violations}}
            .dump()
     << '\n';
}

inline void write_telemetry_csv(std::ostream& os, const EpisodeResult& r, const TraceInfo& info) {
  os << "# config_hash=" << hex64(info.config_hash) << " seed=" << info.seed << '\n';
  os << "step,iteration,best_reward,mean_elite_reward,feasible_fraction,max_sigma\n";
  for (std::size_t s = 0; s < r.telemetry.size(); ++s) {
    for (const auto& it : r.telemetry[s]) {
      os << s << ',' << it.iteration << ',' << it.best_reward << ',' << it.mean_elite_reward << ','
         << it.feasible_fraction << ',' << it.max_sigma << '\n';
    }
  }
}

inline void write_loss_csv(std::ostream& os, const std::map<std::string, TrainReport>& reports, std::uint64_t hash,
                           std::uint64_t seed) {
  os << "# config_hash=" << hex64(hash) << " seed=" << seed << '\n';
  os << "model,epoch,train_loss,val_loss\n";
  for (const auto& [name, rep] : reports) {
    for (std::size_t e = 0; e < rep.train_loss.size(); ++e) {
      os << name << ',' << e + 1 << ',' << rep.train_loss[e] << ',' << rep.val_loss[e] << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Run summary

struct TrialRow {
  std::string scenario;
  std::string mode;
  int trial = 0;
  std::uint64_t seed = 0;
  bool success = false;
  int steps = 0;
  double initial_chamfer = 0.0;
  double final_chamfer = 0.0;
  double final_iou = 0.0;
  std::string reason;
  int audit_violations = 0;
  int audited_steps = 0;
  double mean_plan_seconds = 0.0;

  static TrialRow from(const EpisodeResult& r, const std::string& scenario, int trial, std::uint64_t seed) {
    TrialRow t;
    t.scenario = scenario;
    t.mode = to_string(r.mode);
    t.trial = trial;
    t.seed = seed;
    t.success = r.success;
    t.steps = r.steps;
    t.initial_chamfer = r.initial_chamfer;
    t.final_chamfer = r.final_chamfer;
    t.final_iou = r.final_iou;
    t.reason = to_string(r.reason);
    t.audit_violations = r.audit_violations;
    t.audited_steps = static_cast<int>(r.trace.size());
    double plan = 0;
    for (const auto& s : r.trace) plan += s.plan_seconds;
    t.mean_plan_seconds = r.trace.empty() ? 0.0 : plan / static_cast<double>(r.trace.size());
    return t;
  }
};

struct Aggregate {
  std::string scenario;
  std::string mode;
  int trials = 0;
  int successes = 0;
  double rate = 0.0;
  double mean_iou = 0.0;
  double std_iou = 0.0;
  double mean_steps = 0.0;
  double median_chamfer_ratio = 0.0;  // successful trials, final / initial
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct RunSummary {
  std::uint64_t config_hash = 0;
  std::uint64_t master_seed = 0;
  std::vector<TrialRow> rows;

  // Grouped by (scenario, mode) in first-appearance order.
  std::vector<Aggregate> aggregates() const {
    std::vector<Aggregate> out;
    for (const auto& r : rows) {
      auto it = std::find_if(out.begin(), out.end(),
                             [&](const Aggregate& a) { return a.scenario == r.scenario && a.mode == r.mode; });
      if (it == out.end()) {
        out.push_back({r.scenario, r.mode});
        it = out.end() - 1;
      }
    }
    for (auto& a : out) {
      std::vector<double> ious, ratios;
      double steps = 0;
      for (const auto& r : rows) {
        if (r.scenario != a.scenario || r.mode != a.mode) continue;
        ++a.trials;
        a.successes += r.success;
        ious.push_back(r.final_iou);
        steps += r.steps;
        if (r.success && r.initial_chamfer > 0) ratios.push_back(r.final_chamfer / r.initial_chamfer);
      }
      a.rate = static_cast<double>(a.successes) / a.trials;
      double m = 0;
      for (double v : ious) m += v;
      m /= static_cast<double>(ious.size());
      double var = 0;
      for (double v : ious) var += (v - m) * (v - m);
      a.mean_iou = m;
      a.std_iou = std::sqrt(var / static_cast<double>(ious.size()));
      a.mean_steps = steps / a.trials;
      a.median_chamfer_ratio = median(ratios);
    }
    return out;
  }
};

inline void write_trials_csv(std::ostream& os, const RunSummary& s) {
  os << "# config_hash=" << hex64(s.config_hash) << " master_seed=" << s.master_seed << '\n';
  os << "scenario,mode,trial,seed,success,steps,initial_chamfer,final_chamfer,final_iou,reason,audit_violations,"
        "audited_steps\n";
  for (const auto& r : s.rows) {
    os << r.scenario << ',' << r.mode << ',' << r.trial << ',' << r.seed << ',' << (r.success ? 1 : 0) << ','
       << r.steps << ',' << r.initial_chamfer << ',' << r.final_chamfer << ',' << r.final_iou << ',' << r.reason
       << ',' << r.audit_violations << ',' << r.audited_steps << '\n';
  }
}

// Trial rows as produced by write_trials_csv; used by `report`.
inline RunSummary read_trials_csv(std::istream& is) {
  RunSummary s;
  std::string line;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      auto h = line.find("config_hash=");
      auto m = line.find("master_seed=");
      if (h != std::string::npos) s.config_hash = std::stoull(line.substr(h + 12, 16), nullptr, 16);
      if (m != std::string::npos) s.master_seed = std::stoull(line.substr(m + 12));
      continue;
    }
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 12) throw FormatError("trial table: expected 12 columns, got " + std::to_string(f.size()));
    try {
      TrialRow r;
      r.scenario = f[0];
      r.mode = f[1];
      r.trial = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.success = f[4] == "1";
      r.steps = std::stoi(f[5]);
      r.initial_chamfer = std::stod(f[6]);
      r.final_chamfer = std::stod(f[7]);
      r.final_iou = std::stod(f[8]);
      r.reason = f[9];
      r.audit_violations = std::stoi(f[10]);
      r.audited_steps = std::stoi(f[11]);
      s.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("trial table: malformed row '" + line + "'");
    }
  }
  if (!header) throw FormatError("trial table: missing header");
  return s;
}

// Wall-clock planning time; kept apart from the trial table, which must be
// reproducible bit for bit.
inline void write_timing_csv(std::ostream& os, const RunSummary& s) {
  os << "# config_hash=" << hex64(s.config_hash) << " master_seed=" << s.master_seed << '\n';
  os << "scenario,mode,trial,mean_plan_seconds\n";
  for (const auto& r : s.rows) os << r.scenario << ',' << r.mode << ',' << r.trial << ',' << r.mean_plan_seconds << '\n';
}

inline void write_aggregate_csv(std::ostream& os, const RunSummary& s) {
  os << "# config_hash=" << hex64(s.config_hash) << " master_seed=" << s.master_seed << '\n';
  os << "scenario,mode,trials,successes,rate_percent,mu_iou,sigma_iou,mean_steps,median_chamfer_ratio\n";
  for (const auto& a : s.aggregates()) {
    os << a.scenario << ',' << a.mode << ',' << a.trials << ',' << a.successes << ',' << 100.0 * a.rate << ','
       << a.mean_iou << ',' << a.std_iou << ',' << a.mean_steps << ',' << a.median_chamfer_ratio << '\n';
  }
}

// Methods as rows, scenarios as column groups (Rate %, mu_IoU, sigma_IoU).
inline std::string format_table(const RunSummary& s) {
  const auto aggs = s.aggregates();
  std::vector<std::string> scenarios, modes;
  for (const auto& a : aggs) {
    if (std::find(scenarios.begin(), scenarios.end(), a.scenario) == scenarios.end()) scenarios.push_back(a.scenario);
    if (std::find(modes.begin(), modes.end(), a.mode) == modes.end()) modes.push_back(a.mode);
  }
  std::ostringstream os;
  os << "config_hash " << hex64(s.config_hash) << "  master_seed " << s.master_seed << '\n';
  os << std::left << std::setw(10) << "method";
  for (const auto& sc : scenarios) os << " | " << std::setw(28) << sc;
  os << '\n' << std::setw(10) << "";
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    os << " | " << std::right << std::setw(8) << "Rate %" << std::setw(10) << "mu_IoU" << std::setw(10) << "sigma_IoU"
       << std::left;
  }
  os << '\n';
  for (const auto& m : modes) {
    os << std::left << std::setw(10) << m;
    for (const auto& sc : scenarios) {
      auto it = std::find_if(aggs.begin(), aggs.end(), [&](const Aggregate& a) { return a.scenario == sc && a.mode == m; });
      os << " | " << std::right << std::fixed;
      if (it == aggs.end()) {
        os << std::setw(8) << "-" << std::setw(10) << "-" << std::setw(10) << "-";
      } else {
        os << std::setprecision(1) << std::setw(8) << 100.0 * it->rate << std::setprecision(3) << std::setw(10)
           << it->mean_iou << std::setw(10) << it->std_iou;
      }
      os << std::left << std::defaultfloat;
    }
    os << '\n';
  }
  return os.str();
}

// Per-step Chamfer distance to the demonstration's final cloud, one column
// per trial (step 0 is the initial state).
inline void write_chamfer_curves(std::ostream& os, const std::vector<EpisodeResult>& results,
                                 const std::vector<TrialRow>& rows, std::uint64_t hash, std::uint64_t master_seed) {
  os << "# config_hash=" << hex64(hash) << " master_seed=" << master_seed << '\n';
  std::size_t longest = 0;
  for (const auto& r : results) longest = std::max(longest, r.trace.size());
  os << "step";
  for (const auto& r : rows) os << ',' << r.scenario << '/' << r.mode << '/' << r.trial;
  os << '\n';
  for (std::size_t t = 0; t <= longest; ++t) {
    os << t;
    for (const auto& r : results) {
      os << ',';
      if (t == 0) os << r.initial_chamfer;
      else if (t <= r.trace.size()) os << r.trace[t - 1].chamfer;
    }
    os << '\n';
  }
}

}  // namespace fabimit
