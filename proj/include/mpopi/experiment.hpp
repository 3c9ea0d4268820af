#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "mpopi/controllers.hpp"
#include "mpopi/env.hpp"

namespace mpopi {

struct EnvironmentSpec {
  std::string name;
  nlohmann::json params = nlohmann::json::object();  // validated env-specific overrides
  bool operator==(const EnvironmentSpec&) const = default;
};

struct ExperimentConfig {
  std::string label;  // defaults to the controller type
  EnvironmentSpec environment;
  TaskSpec task;      // empty waypoint list: environment default task
  ControllerConfig controller;
  int episode_steps = 300;
  bool stop_on_goal = true;
  std::vector<std::uint64_t> seeds{0};
  unsigned workers = 1;  // 0: all logical cores
  std::filesystem::path output_dir = "results";

  std::unique_ptr<Environment> make_environment() const;
};

bool operator==(const TaskSpec& a, const TaskSpec& b);
bool operator==(const ControllerConfig& a, const ControllerConfig& b);
bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

/// Parses and validates a JSON experiment config. Unknown keys are errors.
/// Throws ConfigFileError, ConfigParseError or ConfigError; the error's key
/// names the offending entry (e.g. "controller.lambda").
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const ExperimentConfig& cfg);

struct StepRow {
  int step = 0;
  double wall_ms = 0.0;
  Eigen::VectorXd action;  // applied (clamped) control
  double stage_cost = 0.0;
  double cumulative_cost = 0.0;
  double exploration = 0.0;
  double best_sample_cost = 0.0;
  double mean_sample_cost = 0.0;
  double weight_entropy = 0.0;
  Eigen::VectorXd state;  // after applying the action
};

struct ExperimentRecord {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<std::string> state_labels;
  int control_dim = 0;
  std::vector<StepRow> rows;
  bool success = false;
  bool failed = false;
  std::string error;
  double terminal_cost = 0.0;
  double total_cost = 0.0;  // stage costs plus terminal cost of the final state
  int steps_to_goal = -1;
};

// One closed-loop episode; never throws for controller failures.
ExperimentRecord run_episode(const ExperimentConfig& cfg, std::uint64_t seed);

/// Runs every seed, writes `<out>/<label>_seed<k>.csv`, `<label>_episodes.csv`
/// and `<label>_timing.csv`, and returns the records in seed order.
std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg, bool write_files = true);

// Per-step CSV: deterministic columns only (wall time goes to the timing file).
void write_step_csv(std::ostream& out, const ExperimentRecord& record);
std::string step_csv(const ExperimentRecord& record);
std::vector<ExperimentRecord> read_step_csvs(const std::filesystem::path& dir);

struct CostSummary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double success_rate = 0.0;
};
CostSummary summarize_totals(const std::vector<ExperimentRecord>& records);
double quantile(std::vector<double> values, double q);

struct HistogramRow {
  std::string label;
  double bin_left = 0.0;
  double bin_right = 0.0;
  long count = 0;
  double density = 0.0;
};

/// Binned densities of per-step stage costs (or per-episode totals) for every
/// label over one shared bin range. Densities integrate to 1 per label.
std::vector<HistogramRow> summarize_costs(const std::vector<ExperimentRecord>& records, int bins,
                                          bool per_episode = false);
void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows);

struct ComparisonReport {
  std::vector<std::string> labels;
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<double>> totals;  // [controller][seed]
  std::vector<double> medians;
  std::vector<double> wins;      // ties split evenly
  std::vector<double> win_ratio; // wins / seeds
  std::vector<double> success_rate;
  std::vector<HistogramRow> histogram;
};

/// Runs each config and pairs results by seed. Configs must share the
/// environment, task, seed list and per-step simulation budget.
ComparisonReport compare_controllers(const std::vector<ExperimentConfig>& cfgs, int bins = 20,
                                     const std::filesystem::path& out_dir = {});
void check_comparable(const std::vector<ExperimentConfig>& cfgs);
void write_comparison(const std::filesystem::path& dir, const ComparisonReport& report);
std::string format_report(const ComparisonReport& report);

// Shortest round-trip decimal representation.
std::string format_number(double v);

}  // namespace mpopi
