#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "fabimit/experiment.hpp"
#include "support.hpp"

using namespace fabimit;
namespace fs = std::filesystem;

namespace {

PointCloud cloud(std::vector<Vec3> pts) { return PointCloud{std::move(pts)}; }

fs::path scratch(const std::string& name) {
  const fs::path d = fixtures::cache_dir() / "harness" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream os(p);
  os << text;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FABIMIT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TrialRow row(const std::string& mode, int trial, bool success, double iou) {
  TrialRow r;
  r.scenario = "box";
  r.mode = mode;
  r.trial = trial;
  r.seed = 100 + static_cast<std::uint64_t>(trial);
  r.success = success;
  r.steps = 7 + trial;
  r.initial_chamfer = 0.0612345678901234;
  r.final_chamfer = 0.000123456789;
  r.final_iou = iou;
  r.reason = "terminated-success-classifier";
  r.audit_violations = trial % 2;
  r.audited_steps = r.steps;
  return r;
}

}  // namespace

TEST(Chamfer, Examples) {
  const PointCloud a = cloud({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)});
  EXPECT_EQ(chamfer(a, a), 0.0);
  EXPECT_NEAR(chamfer(cloud({Vec3(0, 0, 0)}), cloud({Vec3(0.3, 0, 0.4)})), 2 * 0.25, 1e-15);
  const PointCloud b = cloud({Vec3(0.1, 0, 0), Vec3(2, 2, 2)});
  EXPECT_DOUBLE_EQ(chamfer(a, b), chamfer(b, a));
  EXPECT_THROW(chamfer(a, PointCloud{}), std::invalid_argument);
}

TEST(Config, DefaultsWhenEmpty) {
  const ExperimentConfig c = parse_config("");
  EXPECT_EQ(c.trials, 50);
  EXPECT_EQ(c.master_seed, 99u);
  EXPECT_EQ(c.control.H, 40);
  EXPECT_EQ(c.scenarios.size(), 2u);
  EXPECT_EQ(c.trial_seed(3), derive_seed(99, 3));
}

TEST(Config, ParsesSectionsListsAndComments) {
  const ExperimentConfig c = parse_config(R"(
# comment
[control]
n_samples = 50   # trailing comment
beta = 1.0

[reward]
registration = "kabsch"

[experiment]
scenarios = [hanger]
trials = 4
seeds = [7, 10..12]

[paths]
root = "somewhere"
)");
  EXPECT_EQ(c.control.n_samples, 50);
  EXPECT_EQ(c.control.beta, 1.0);
  EXPECT_TRUE(c.reward.kabsch_oracle);
  ASSERT_EQ(c.scenarios.size(), 1u);
  EXPECT_EQ(c.scenarios[0], ScenarioKind::kHanger);
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{7, 10, 11, 12}));
  EXPECT_EQ(c.trial_seed(1), 10u);
  EXPECT_EQ(c.paths.dataset(), fs::path("somewhere") / "dataset.bin");
}

TEST(Config, ErrorsAreConfigErrors) {
  EXPECT_THROW(parse_config("[control]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[nowhere]\nh = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[control]\nh = five\n"), ConfigError);
  EXPECT_THROW(parse_config("[control]\nh = 5\nh = 6\n"), ConfigError);
  EXPECT_THROW(parse_config("h = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\ntrials = 3\nseeds = 1..4\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nseeds = 5..2\ntrials = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[experiment]\nscenarios = [contact-free]\n"), ConfigError);
  EXPECT_THROW(parse_config("[reward]\ntau_i = 1.5\n"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.toml"), ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
  const ExperimentConfig a = parse_config("[control]\nn_samples = 50\n");
  const ExperimentConfig b = parse_config("# same thing\n[control]\nn_samples   =   50\n");
  const ExperimentConfig c = parse_config("[control]\nn_samples = 51\n");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
  EXPECT_EQ(parse_config(a.dump()).hash(), a.hash());
}

TEST(Config, ShippedConfigsLoad) {
  for (const char* name : {"default.toml", "smoke.toml"}) {
    EXPECT_NO_THROW(load_config(fs::path(FABIMIT_CONFIG_DIR) / name)) << name;
  }
  EXPECT_EQ(load_config(fs::path(FABIMIT_CONFIG_DIR) / "default.toml").hash(), parse_config("").hash());
}

TEST(TrialTable, RoundTrip) {
  RunSummary s;
  s.config_hash = 0x0123456789abcdefULL;
  s.master_seed = 99;
  s.rows = {row("full", 0, true, 0.9), row("full", 1, false, 0.4), row("no-mpc", 0, true, 0.8)};
  std::stringstream ss;
  ss << std::setprecision(17);
  write_trials_csv(ss, s);
  const RunSummary back = read_trials_csv(ss);
  EXPECT_EQ(back.config_hash, s.config_hash);
  EXPECT_EQ(back.master_seed, 99u);
  ASSERT_EQ(back.rows.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.rows[i].mode, s.rows[i].mode);
    EXPECT_EQ(back.rows[i].seed, s.rows[i].seed);
    EXPECT_EQ(back.rows[i].success, s.rows[i].success);
    EXPECT_EQ(back.rows[i].final_chamfer, s.rows[i].final_chamfer);
    EXPECT_EQ(back.rows[i].audit_violations, s.rows[i].audit_violations);
  }
  std::stringstream bad("scenario,mode\nbox,full\n");
  EXPECT_THROW(read_trials_csv(bad), FormatError);
  std::stringstream empty("");
  EXPECT_THROW(read_trials_csv(empty), FormatError);
}

TEST(TrialTable, Aggregates) {
  RunSummary s;
  s.rows = {row("full", 0, true, 0.9), row("full", 1, false, 0.5), row("no-mpc", 0, false, 0.2)};
  const auto a = s.aggregates();
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].mode, "full");
  EXPECT_EQ(a[0].trials, 2);
  EXPECT_DOUBLE_EQ(a[0].rate, 0.5);
  EXPECT_NEAR(a[0].mean_iou, 0.7, 1e-12);
  EXPECT_NEAR(a[0].std_iou, 0.2, 1e-12);
  EXPECT_NEAR(a[0].median_chamfer_ratio, 0.000123456789 / 0.0612345678901234, 1e-15);
  EXPECT_TRUE(std::isnan(a[1].median_chamfer_ratio));
  const std::string table = format_table(s);
  EXPECT_NE(table.find("Rate %"), std::string::npos);
  EXPECT_NE(table.find("no-mpc"), std::string::npos);
  EXPECT_NE(table.find("50.0"), std::string::npos);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2);
  EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
  EXPECT_TRUE(std::isnan(median({})));
}

TEST(AtomicWrite, ReplacesWholeFileAndLeavesNoStaging) {
  const fs::path d = scratch("atomic");
  const fs::path f = d / "sub" / "out.txt";
  atomic_write(f, [](std::ostream& os) { os << "first"; });
  atomic_write(f, [](std::ostream& os) { os << "second"; });
  std::ifstream is(f);
  std::string text((std::istreambuf_iterator<char>(is)), {});
  EXPECT_EQ(text, "second");
  EXPECT_THROW(atomic_write(f, [](std::ostream&) { throw std::runtime_error("boom"); }), std::runtime_error);
  std::ifstream again(f);
  std::string kept((std::istreambuf_iterator<char>(again)), {});
  EXPECT_EQ(kept, "second");
  int files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(d / "sub")) ++files;
  EXPECT_EQ(files, 1);
}

TEST(Trace, NdjsonRecordsParse) {
  const auto& rec = fixtures::demo_for(ScenarioKind::kBox);
  EpisodeConfig cfg;
  const EpisodeResult r = run_episode(init_scenario(default_scenario(ScenarioKind::kBox)), rec.demo,
                                      fixtures::box_models(), cfg, PlannerMode::kOracle, 1, &rec.actions);
  std::stringstream ss;
  write_trace(ss, r, TraceInfo{"box", 0, 42, 0xfeed});
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(ss, line)) lines.push_back(nlohmann::json::parse(line));
  ASSERT_EQ(lines.size(), static_cast<std::size_t>(r.steps) + 3);
  EXPECT_EQ(lines.front()["format"], "fabimit-trace");
  EXPECT_EQ(lines.front()["config_hash"], "000000000000feed");
  EXPECT_EQ(lines.front()["keypoints"], 4);
  EXPECT_EQ(lines[1]["t"], 0);
  EXPECT_EQ(lines[2]["keypoints"].size(), 12u);  // x y z per keypoint
  EXPECT_EQ(lines[2]["action"].size(), 2u);
  EXPECT_EQ(lines.back()["record"], "result");
  EXPECT_EQ(lines.back()["reason"], "terminated-success-classifier");
  EXPECT_EQ(lines.back()["success"], true);
}

TEST(Cli, ExitCodes) {
  const fs::path d = scratch("cli");
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("collect"), 2);
  EXPECT_EQ(run_cli("train -c " + (d / "missing.toml").string()), 2);
  write_text(d / "bad.toml", "[control]\nnope = 1\n");
  EXPECT_EQ(run_cli("train -c " + (d / "bad.toml").string()), 2);
  write_text(d / "mismatch.toml", "[experiment]\ntrials = 2\nseeds = 1..3\n");
  EXPECT_EQ(run_cli("evaluate -c " + (d / "mismatch.toml").string()), 2);
  write_text(d / "ok.toml", "[paths]\nroot = \"" + (d / "run").string() + "\"\n");
  EXPECT_EQ(run_cli("train -c " + (d / "ok.toml").string()), 3);
  EXPECT_EQ(run_cli("evaluate -c " + (d / "ok.toml").string()), 3);
  EXPECT_EQ(run_cli("imitate -c " + (d / "ok.toml").string() + " -m sideways"), 3);  // artifacts are checked first
  EXPECT_EQ(run_cli("report " + (d / "nothing.csv").string()), 3);
  write_text(d / "junk.csv", "scenario,mode\nbox,full\n");
  EXPECT_EQ(run_cli("report " + (d / "junk.csv").string()), 3);

  RunSummary s;
  s.rows = {row("full", 0, true, 0.9)};
  atomic_write(d / "t.csv", [&](std::ostream& os) { write_trials_csv(os, s); });
  EXPECT_EQ(run_cli("report " + (d / "t.csv").string() + " -o " + (d / "agg.csv").string()), 0);
  EXPECT_TRUE(fs::exists(d / "agg.csv"));
}
