#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "mpopi/errors.hpp"
#include "mpopi/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mpopi_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

json small_config(const std::string& type) {
  return json{{"environment", {{"name", "point-mass-2d"}}},
              {"controller", {{"type", type}, {"samples", 12}, {"horizon", 10}, {"cycles", 3}}},
              {"episode_steps", 15},
              {"seeds", {0, 1, 2}}};
}

std::string config_error_key(const json& doc) {
  try {
    mpopi::parse_config(doc);
  } catch (const mpopi::ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

mpopi::ExperimentRecord record(const std::string& label, std::vector<double> stage_costs) {
  mpopi::ExperimentRecord r;
  r.label = label;
  double total = 0;
  for (std::size_t i = 0; i < stage_costs.size(); ++i) {
    mpopi::StepRow row;
    row.step = static_cast<int>(i);
    row.stage_cost = stage_costs[i];
    total += stage_costs[i];
    r.rows.push_back(row);
  }
  r.total_cost = total;
  return r;
}

TEST(Config, MinimalConfigAppliesDefaults) {
  const auto cfg = mpopi::parse_config(json{{"environment", {{"name", "step-climber"}}},
                                            {"controller", {{"type", "mpopi"}}}});
  EXPECT_EQ(cfg.controller.samples, 30);
  EXPECT_EQ(cfg.controller.horizon, 40);
  EXPECT_EQ(cfg.controller.temperature, 0.1);
  EXPECT_EQ(cfg.controller.cycles, 3);
  EXPECT_EQ(cfg.controller.cov_floor, 1e-6);
  EXPECT_EQ(cfg.controller.init_scale, 0.2);
  EXPECT_EQ(cfg.label, "mpopi");
  EXPECT_EQ(cfg.seeds, std::vector<std::uint64_t>{0});
}

TEST(Config, ErrorsNameTheKey) {
  json doc = small_config("mpopi");
  doc["controller"]["lambda"] = -1;
  EXPECT_EQ(config_error_key(doc), "controller.lambda");
  doc = small_config("mpopi");
  doc["controller"]["elites"] = 5;
  EXPECT_EQ(config_error_key(doc), "controller.elites");
  doc = small_config("mpopi");
  doc["controller"]["lamda"] = 0.1;
  EXPECT_EQ(config_error_key(doc), "controller.lamda");
  doc = small_config("mpopi");
  doc["environment"]["params"] = {{"massive", 2}};
  EXPECT_EQ(config_error_key(doc), "environment.params.massive");
  doc = small_config("mpopi");
  doc["environment"]["name"] = "moon-lander";
  EXPECT_EQ(config_error_key(doc), "environment.name");
  doc = small_config("mpopi");
  doc.erase("controller");
  EXPECT_EQ(config_error_key(doc), "controller");
  doc = small_config("mpopi");
  doc["controller"]["type"] = "pso";
  EXPECT_EQ(config_error_key(doc), "controller.type");
  doc = small_config("mpopi");
  doc["episode_steps"] = -1;
  EXPECT_EQ(config_error_key(doc), "episode_steps");
  doc = small_config("mpopi");
  doc["task"] = {{"waypoints", json::array({{{"x", 1}, {"y", 0}, {"tolerance", 0}}})}};
  EXPECT_EQ(config_error_key(doc), "task");
}

TEST(Config, RoundTrip) {
  json doc = small_config("ce");
  doc["controller"]["elites"] = 4;
  doc["controller"]["shift_fill"] = "zero";
  doc["environment"]["params"] = {{"damping", 0.75}, {"initial_position", {0.5, -0.5}}};
  doc["task"] = {{"waypoints", json::array({{{"x", 1.5}, {"y", 0.25}, {"tolerance", 0.05}}})},
                 {"target_speed", 0.3}};
  doc["seeds"] = {{"first", 4}, {"count", 3}};
  const auto cfg = mpopi::parse_config(doc);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{4, 5, 6}));
  const auto again = mpopi::parse_config(mpopi::to_json(cfg));
  EXPECT_TRUE(again == cfg);
  EXPECT_EQ(mpopi::to_json(again), mpopi::to_json(cfg));
}

TEST(Config, LoadErrorsAreDistinct) {
  const fs::path dir = scratch("load");
  EXPECT_THROW(mpopi::load_config(dir / "missing.json"), mpopi::ConfigFileError);
  EXPECT_THROW(mpopi::load_config(write(dir / "broken.json", "{\"environment\": ")), mpopi::ConfigParseError);
  EXPECT_THROW(mpopi::load_config(write(dir / "bad.json", "{\"controller\": {\"type\": \"mppi\"}}")),
               mpopi::ConfigError);
  const auto cfg = mpopi::load_config(write(dir / "good.json", small_config("mppi").dump()));
  EXPECT_EQ(cfg.controller.samples, 12);
}

TEST(Config, ShippedConfigsLoad) {
  const fs::path dir = fs::path(MPOPI_SOURCE_DIR) / "configs";
  int count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(mpopi::load_config(entry.path())) << entry.path();
    ++count;
  }
  EXPECT_GT(count, 0);
}

TEST(Episode, ZeroLengthWritesHeaderAndFooterOnly) {
  auto cfg = mpopi::parse_config(small_config("mppi"));
  cfg.episode_steps = 0;
  const auto rec = mpopi::run_episode(cfg, 0);
  EXPECT_FALSE(rec.success);
  EXPECT_TRUE(rec.rows.empty());
  const std::string csv = mpopi::step_csv(rec);
  EXPECT_EQ(csv,
            "step,action_0,action_1,stage_cost,cumulative_cost,exploration,best_sample_cost,mean_sample_cost,"
            "weight_entropy,state_px,state_py,state_vx,state_vy,state_waypoint\n"
            "# seed=0 success=0 total_cost=0 terminal_cost=0 steps_to_goal=-1 status=ok\n");
}

TEST(Episode, RowsAccumulateCost) {
  const auto cfg = mpopi::parse_config(small_config("mpopi"));
  const auto rec = mpopi::run_episode(cfg, 1);
  ASSERT_EQ(rec.rows.size(), 15u);
  double cumulative = 0;
  for (const auto& r : rec.rows) {
    cumulative += r.stage_cost;
    EXPECT_EQ(r.cumulative_cost, cumulative);
    EXPECT_LE(r.best_sample_cost, r.mean_sample_cost);
  }
  EXPECT_EQ(rec.total_cost, cumulative + rec.terminal_cost);
}

TEST(Episode, ControllerFailureKeepsPartialRows) {
  // One wide sample per step in a narrow workspace: every rollout eventually leaves it.
  json doc = {{"environment", {{"name", "step-climber"}, {"params", {{"x_min", -0.3}, {"x_max", 0.3}}}}},
              {"controller", {{"type", "mppi"}, {"samples", 1}, {"horizon", 30}, {"init_scale", 1.0}}},
              {"episode_steps", 200}};
  const auto rec = mpopi::run_episode(mpopi::parse_config(doc), 2);
  EXPECT_TRUE(rec.failed);
  EXPECT_NE(rec.error.find("StepFailure"), std::string::npos) << rec.error;
  EXPECT_GT(rec.rows.size(), 0u);
  EXPECT_LT(rec.rows.size(), 200u);
  EXPECT_EQ(rec.total_cost, rec.rows.back().cumulative_cost + rec.terminal_cost);
  EXPECT_NE(mpopi::step_csv(rec).find("status=failed"), std::string::npos);
}

TEST(Experiment, RerunsAreByteIdentical) {
  const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
  auto cfg = mpopi::parse_config(small_config("mpopi"));
  cfg.output_dir = a;
  mpopi::run_experiment(cfg);
  cfg.output_dir = b;
  cfg.workers = 3;
  mpopi::run_experiment(cfg);
  for (const char* name : {"mpopi_seed0.csv", "mpopi_seed1.csv", "mpopi_seed2.csv", "mpopi_episodes.csv"}) {
    const std::string first = read(a / name);
    EXPECT_FALSE(first.empty()) << name;
    EXPECT_EQ(first, read(b / name)) << name;
  }
  EXPECT_TRUE(fs::exists(a / "mpopi_timing.csv"));
}

TEST(Experiment, StepCsvsReadBack) {
  const fs::path dir = scratch("readback");
  auto cfg = mpopi::parse_config(small_config("cma"));
  cfg.output_dir = dir;
  const auto written = mpopi::run_experiment(cfg);
  const auto read_back = mpopi::read_step_csvs(dir);
  ASSERT_EQ(read_back.size(), written.size());
  for (std::size_t i = 0; i < written.size(); ++i) {
    EXPECT_EQ(read_back[i].label, "cma");
    EXPECT_EQ(read_back[i].seed, written[i].seed);
    EXPECT_EQ(read_back[i].total_cost, written[i].total_cost);
    ASSERT_EQ(read_back[i].rows.size(), written[i].rows.size());
    for (std::size_t k = 0; k < written[i].rows.size(); ++k) {
      EXPECT_EQ(read_back[i].rows[k].stage_cost, written[i].rows[k].stage_cost);
    }
  }
}

TEST(Summary, QuantilesAndSuccess) {
  EXPECT_EQ(mpopi::quantile({4, 1, 3, 2}, 0.5), 2.5);
  EXPECT_EQ(mpopi::quantile({4, 1, 3, 2}, 0.25), 1.75);
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(mpopi::quantile({1, inf, inf}, 0.5), inf);
  std::vector<mpopi::ExperimentRecord> recs{record("a", {1}), record("a", {3}), record("a", {2})};
  recs[0].success = true;
  recs[2].failed = true;
  const auto s = mpopi::summarize_totals(recs);
  EXPECT_EQ(s.median, 3.0);
  EXPECT_NEAR(s.success_rate, 1.0 / 3.0, 1e-15);
}

TEST(Histogram, SingleRecordSingleBin) {
  const auto rows = mpopi::summarize_costs({record("a", {2.0})}, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].count, 1);
  EXPECT_DOUBLE_EQ(rows[0].density * (rows[0].bin_right - rows[0].bin_left), 1.0);
  EXPECT_LE(rows[0].bin_left, 2.0);
  EXPECT_GE(rows[0].bin_right, 2.0);
}

TEST(Histogram, DensitiesIntegrateToOne) {
  std::vector<double> a, b;
  for (int i = 0; i < 97; ++i) a.push_back(std::sin(i) * 5 + 6);
  for (int i = 0; i < 41; ++i) b.push_back(std::cos(i) * 2 + 4);
  const auto rows = mpopi::summarize_costs({record("a", a), record("b", b), record("a", {1, 2})}, 13);
  double ia = 0, ib = 0;
  for (const auto& r : rows) (r.label == "a" ? ia : ib) += r.density * (r.bin_right - r.bin_left);
  EXPECT_NEAR(ia, 1.0, 1e-9);
  EXPECT_NEAR(ib, 1.0, 1e-9);
}

TEST(Histogram, DisjointRangesHaveDisjointSupport) {
  const auto rows = mpopi::summarize_costs({record("low", {0, 1, 2}), record("high", {10, 11, 12})}, 10);
  double low_max = -1, high_min = 1e9;
  for (const auto& r : rows) {
    if (r.count == 0) continue;
    if (r.label == "low") low_max = std::max(low_max, r.bin_right);
    if (r.label == "high") high_min = std::min(high_min, r.bin_left);
  }
  EXPECT_LE(low_max, high_min);
}

TEST(Histogram, PerEpisodeTotals) {
  const auto rows = mpopi::summarize_costs({record("a", {1, 1}), record("a", {2, 2})}, 2, true);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].count, 1);
  EXPECT_EQ(rows[1].count, 1);
}

TEST(Histogram, RejectsBadInput) {
  EXPECT_THROW(mpopi::summarize_costs({}, 5), mpopi::InputError);
  EXPECT_THROW(mpopi::summarize_costs({record("a", {1})}, 0), mpopi::ParameterError);
}

TEST(Histogram, CsvColumns) {
  std::ostringstream s;
  mpopi::write_histogram_csv(s, mpopi::summarize_costs({record("a", {2.0})}, 1));
  EXPECT_EQ(s.str().substr(0, s.str().find('\n')), "controller,bin_left,bin_right,count,density");
}

TEST(Compare, SelfComparisonTies) {
  const auto cfg = mpopi::parse_config(small_config("mppi"));
  const fs::path dir = scratch("self");
  const auto report = mpopi::compare_controllers({cfg, cfg}, 5, dir);
  ASSERT_EQ(report.labels, (std::vector<std::string>{"mppi", "mppi_2"}));
  EXPECT_EQ(report.totals[0], report.totals[1]);
  EXPECT_EQ(report.win_ratio, (std::vector<double>{0.5, 0.5}));
  for (const char* f : {"comparison.csv", "comparison_summary.csv", "cost_histogram.csv", "mppi_2_seed0.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
}

TEST(Compare, SingleCycleMatchesMppi) {
  json a = small_config("mppi"), b = small_config("mpopi");
  b["controller"]["cycles"] = 1;
  b["controller"]["alpha"] = 1.0;
  const auto report = mpopi::compare_controllers({mpopi::parse_config(a), mpopi::parse_config(b)});
  EXPECT_EQ(report.totals[0], report.totals[1]);
}

TEST(Compare, RefusesMismatchedConfigs) {
  const auto base = mpopi::parse_config(small_config("mppi"));
  auto other = base;
  other.controller.samples = 13;
  EXPECT_THROW(mpopi::check_comparable({base, other}), mpopi::ConfigError);
  other = base;
  other.seeds = {0, 1};
  EXPECT_THROW(mpopi::check_comparable({base, other}), mpopi::ConfigError);
  other = base;
  other.environment.name = "pd-joint";
  EXPECT_THROW(mpopi::check_comparable({base, other}), mpopi::ConfigError);
  other = base;
  other.task.waypoints = {{{1, 1}, 0.1}};
  EXPECT_THROW(mpopi::check_comparable({base, other}), mpopi::ConfigError);
  EXPECT_THROW(mpopi::check_comparable({base}), mpopi::ConfigError);
  EXPECT_NO_THROW(mpopi::check_comparable({base, base}));
}

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(mpopi::format_number(0.1), "0.1");
  EXPECT_EQ(mpopi::format_number(-2.0), "-2");
  EXPECT_EQ(mpopi::format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(mpopi::format_number(std::nan("")), "nan");
  const double v = 0.1 + 0.2;
  EXPECT_EQ(std::stod(mpopi::format_number(v)), v);
}

}  // namespace
