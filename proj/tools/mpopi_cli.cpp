// Experiment runner: `run`, `compare` and `summarize`.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mpopi/errors.hpp"
#include "mpopi/experiment.hpp"

namespace {

using namespace mpopi;

struct Overrides {
  int workers = -1;
  std::string seed_list;
  std::string out;
  bool reset_cov = false;
};

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoull(item.substr(0, dash)), hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw ConfigError("seeds", "empty range '" + item + "'");
        for (auto k = lo; k <= hi; ++k) seeds.push_back(k);
      } else {
        seeds.push_back(std::stoull(item));
      }
    } catch (const std::logic_error&) {
      throw ConfigError("seeds", "malformed seed list entry '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seeds", "empty seed list");
  return seeds;
}

ExperimentConfig load_with_overrides(const std::string& path, const Overrides& o) {
  ExperimentConfig cfg = load_config(path);
  if (o.workers >= 0) cfg.workers = static_cast<unsigned>(o.workers);
  if (!o.seed_list.empty()) cfg.seeds = parse_seed_list(o.seed_list);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.reset_cov) cfg.controller.reset_covariance = true;
  return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--workers", o.workers, "Rollout worker threads (0: all logical cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed-list", o.seed_list, "Seeds, e.g. 0,1,2 or 0-19");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_flag("--reset-cov", o.reset_cov, "Restore the initial covariance at every step");
}

int run(const std::string& path, const Overrides& o) {
  const ExperimentConfig cfg = load_with_overrides(path, o);
  const auto records = run_experiment(cfg);
  int failed = 0;
  for (const auto& r : records) {
    failed += r.failed ? 1 : 0;
    std::cout << cfg.label << " seed " << r.seed << ": total cost " << format_number(r.total_cost)
              << (r.success ? ", success" : "") << (r.failed ? ", failed (" + r.error + ")" : "") << '\n';
  }
  const CostSummary s = summarize_totals(records);
  std::cout << "median total cost " << format_number(s.median) << ", IQR [" << format_number(s.q1) << ", "
            << format_number(s.q3) << "], success rate " << format_number(s.success_rate);
  if (failed > 0) std::cout << ", failed episodes " << failed;
  std::cout << "\nresults in " << cfg.output_dir.string() << '\n';
  return 0;
}

int compare(const std::vector<std::string>& paths, int bins, const Overrides& o) {
  std::vector<ExperimentConfig> cfgs;
  for (const auto& p : paths) cfgs.push_back(load_with_overrides(p, o));
  const auto out = o.out.empty() ? cfgs.front().output_dir : std::filesystem::path(o.out);
  const ComparisonReport report = compare_controllers(cfgs, bins, out);
  const std::string text = format_report(report);
  std::ofstream(out / "comparison.txt") << text;
  std::cout << text << "results in " << out.string() << '\n';
  return 0;
}

int summarize(const std::string& dir, int bins, bool per_episode, const std::string& out) {
  const auto records = read_step_csvs(dir);
  if (records.empty()) throw InputError("no step results in '" + dir + "'");
  const auto rows = summarize_costs(records, bins, per_episode);
  if (out.empty()) {
    write_histogram_csv(std::cout, rows);
  } else {
    std::filesystem::create_directories(std::filesystem::path(out).parent_path().empty()
                                            ? std::filesystem::path(".")
                                            : std::filesystem::path(out).parent_path());
    std::ofstream file(out);
    if (!file) throw InputError("cannot write '" + out + "'");
    write_histogram_csv(file, rows);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sampling-based MPC experiments (MPPI, CMA, CE, MPOPI)"};
  app.require_subcommand(1);

  Overrides run_o, cmp_o;
  std::string config;
  auto* run_cmd = app.add_subcommand("run", "Run one config over its seeds");
  run_cmd->add_option("config", config, "Experiment config (JSON)")->required();
  add_common(run_cmd, run_o);

  std::vector<std::string> configs;
  int cmp_bins = 20;
  auto* cmp_cmd = app.add_subcommand("compare", "Compare controllers on a shared env, task, seeds and budget");
  cmp_cmd->add_option("configs", configs, "Two or more experiment configs")->required()->expected(2, -1);
  cmp_cmd->add_option("--bins", cmp_bins, "Histogram bins")->check(CLI::PositiveNumber);
  add_common(cmp_cmd, cmp_o);

  std::string dir, sum_out;
  int bins = 20;
  bool per_episode = false;
  auto* sum_cmd = app.add_subcommand("summarize", "Cost histogram of the step CSVs in a results directory");
  sum_cmd->add_option("dir", dir, "Results directory")->required();
  sum_cmd->add_option("--bins", bins, "Histogram bins")->check(CLI::PositiveNumber);
  sum_cmd->add_flag("--per-episode", per_episode, "Bin episode totals instead of stage costs");
  sum_cmd->add_option("--out", sum_out, "Write the histogram CSV here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(config, run_o);
    if (*cmp_cmd) return compare(configs, cmp_bins, cmp_o);
    if (*sum_cmd) return summarize(dir, bins, per_episode, sum_out);
  } catch (const mpopi::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
