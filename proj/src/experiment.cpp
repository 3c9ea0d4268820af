#include "mpopi/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <regex>
#include <sstream>

#include "mpopi/errors.hpp"

namespace mpopi {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

ExperimentRecord run_episode(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto env = cfg.make_environment();
  ExperimentRecord rec;
  rec.label = cfg.label;
  rec.seed = seed;
  rec.state_labels = env->state_labels();
  rec.control_dim = env->control_dim();

  Controller controller(cfg.controller, env->control_dim(), seed, cfg.workers);
  State x = env->initial_state();
  double cumulative = 0.0;
  for (int k = 0; k < cfg.episode_steps; ++k) {
    StepResult r;
    try {
      r = controller.step(*env, x);
    } catch (const Error& e) {
      rec.failed = true;
      rec.error = std::string(e.kind()) + ": " + e.what();
      break;
    }
    const Control u = env->clamp(r.action);
    const double stage = env->stage_cost(x, u);
    Transition next = env->transition(x, u);
    if (!next.valid) {
      rec.failed = true;
      rec.error = "InvalidState: environment left its workspace";
      break;
    }
    x = std::move(next.state);
    cumulative += stage;

    StepRow row;
    row.step = k;
    row.wall_ms = r.diagnostics.wall_ms;
    row.action = u;
    row.stage_cost = stage;
    row.cumulative_cost = cumulative;
    row.exploration = r.diagnostics.exploration;
    row.best_sample_cost = r.diagnostics.best_cost;
    row.mean_sample_cost = r.diagnostics.mean_cost;
    row.weight_entropy = r.diagnostics.weight_entropy;
    row.state = x;
    rec.rows.push_back(std::move(row));

    if (!rec.success && env->task_complete(x)) {
      rec.success = true;
      rec.steps_to_goal = k + 1;
      if (cfg.stop_on_goal) break;
    }
  }
  rec.terminal_cost = rec.rows.empty() ? 0.0 : env->terminal_cost(x);
  rec.total_cost = cumulative + rec.terminal_cost;
  return rec;
}

void write_step_csv(std::ostream& out, const ExperimentRecord& rec) {
  out << "step";
  for (int j = 0; j < rec.control_dim; ++j) out << ",action_" << j;
  out << ",stage_cost,cumulative_cost,exploration,best_sample_cost,mean_sample_cost,weight_entropy";
  for (const auto& s : rec.state_labels) out << ",state_" << s;
  out << '\n';
  for (const auto& r : rec.rows) {
    out << r.step;
    for (Eigen::Index j = 0; j < r.action.size(); ++j) out << ',' << format_number(r.action[j]);
    out << ',' << format_number(r.stage_cost) << ',' << format_number(r.cumulative_cost) << ','
        << format_number(r.exploration) << ',' << format_number(r.best_sample_cost) << ','
        << format_number(r.mean_sample_cost) << ',' << format_number(r.weight_entropy);
    for (Eigen::Index j = 0; j < r.state.size(); ++j) out << ',' << format_number(r.state[j]);
    out << '\n';
  }
  out << "# seed=" << rec.seed << " success=" << (rec.success ? 1 : 0)
      << " total_cost=" << format_number(rec.total_cost) << " terminal_cost=" << format_number(rec.terminal_cost)
      << " steps_to_goal=" << rec.steps_to_goal << " status=" << (rec.failed ? "failed" : "ok") << '\n';
}

std::string step_csv(const ExperimentRecord& record) {
  std::ostringstream s;
  write_step_csv(s, record);
  return s.str();
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string item;
  while (std::getline(s, item, sep)) out.push_back(item);
  return out;
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InputError("malformed number '" + s + "'");
  return v;
}

}  // namespace

std::vector<ExperimentRecord> run_experiment(const ExperimentConfig& cfg, bool write_files) {
  std::vector<ExperimentRecord> records;
  records.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) records.push_back(run_episode(cfg, seed));
  if (!write_files) return records;

  fs::create_directories(cfg.output_dir);
  std::ostringstream episodes, timing;
  episodes << "seed,success,total_cost,terminal_cost,steps_to_goal,steps,status\n";
  timing << "seed,step,wall_ms\n";
  for (const auto& r : records) {
    write_file(cfg.output_dir / (cfg.label + "_seed" + std::to_string(r.seed) + ".csv"), step_csv(r));
    episodes << r.seed << ',' << (r.success ? 1 : 0) << ',' << format_number(r.total_cost) << ','
             << format_number(r.terminal_cost) << ',' << r.steps_to_goal << ',' << r.rows.size() << ','
             << (r.failed ? "failed" : "ok") << '\n';
    for (const auto& row : r.rows) timing << r.seed << ',' << row.step << ',' << format_number(row.wall_ms) << '\n';
  }
  write_file(cfg.output_dir / (cfg.label + "_episodes.csv"), episodes.str());
  write_file(cfg.output_dir / (cfg.label + "_timing.csv"), timing.str());
  return records;
}

std::vector<ExperimentRecord> read_step_csvs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw InputError("not a directory: '" + dir.string() + "'");
  static const std::regex name_re(R"((.+)_seed(\d+)\.csv)");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && std::regex_match(entry.path().filename().string(), name_re)) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());

  std::vector<ExperimentRecord> out;
  for (const auto& path : files) {
    std::smatch m;
    const std::string fname = path.filename().string();
    std::regex_match(fname, m, name_re);
    ExperimentRecord rec;
    rec.label = m[1];
    rec.seed = std::stoull(m[2]);
    std::ifstream in(path);
    std::string line;
    if (!std::getline(in, line)) throw InputError("empty results file '" + path.string() + "'");
    const auto header = split(line, ',');
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    if (!col.count("stage_cost") || !col.count("cumulative_cost")) {
      throw InputError("'" + path.string() + "' is not a step results file");
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        for (const auto& kv : split(line.substr(1), ' ')) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
          if (key == "success") rec.success = value == "1";
          if (key == "total_cost") rec.total_cost = parse_double(value);
          if (key == "terminal_cost") rec.terminal_cost = parse_double(value);
          if (key == "steps_to_goal") rec.steps_to_goal = std::stoi(value);
          if (key == "status") rec.failed = value == "failed";
        }
        continue;
      }
      const auto cells = split(line, ',');
      if (cells.size() != header.size()) throw InputError("ragged row in '" + path.string() + "'");
      StepRow row;
      row.step = std::stoi(cells[0]);
      row.stage_cost = parse_double(cells[col["stage_cost"]]);
      row.cumulative_cost = parse_double(cells[col["cumulative_cost"]]);
      rec.rows.push_back(std::move(row));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw InputError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  if (frac == 0.0 || values[lo] == values[hi]) return values[lo];
  return values[lo] + frac * (values[hi] - values[lo]);
}

CostSummary summarize_totals(const std::vector<ExperimentRecord>& records) {
  if (records.empty()) throw InputError("summarize_totals: no records");
  std::vector<double> totals;
  int successes = 0;
  for (const auto& r : records) {
    totals.push_back(r.failed ? std::numeric_limits<double>::infinity() : r.total_cost);
    successes += r.success ? 1 : 0;
  }
  return {quantile(totals, 0.5), quantile(totals, 0.25), quantile(totals, 0.75),
          static_cast<double>(successes) / static_cast<double>(records.size())};
}

std::vector<HistogramRow> summarize_costs(const std::vector<ExperimentRecord>& records, int bins, bool per_episode) {
  if (records.empty()) throw InputError("summarize_costs: no records");
  if (bins < 1) throw ParameterError("summarize_costs: bins must be at least 1", "bins");

  std::vector<std::string> labels;
  std::map<std::string, std::vector<double>> values;
  for (const auto& r : records) {
    if (!values.count(r.label)) labels.push_back(r.label);
    auto& v = values[r.label];
    if (per_episode) {
      if (std::isfinite(r.total_cost)) v.push_back(r.total_cost);
    } else {
      for (const auto& row : r.rows) {
        if (std::isfinite(row.stage_cost)) v.push_back(row.stage_cost);
      }
    }
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [label, v] : values) {
    for (double x : v) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  }
  if (!std::isfinite(lo)) throw InputError("summarize_costs: no finite costs");
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / bins;

  std::vector<HistogramRow> out;
  for (const auto& label : labels) {
    const auto& v = values[label];
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double x : v) {
      auto b = static_cast<long>(std::floor((x - lo) / width));
      b = std::clamp(b, 0L, static_cast<long>(bins - 1));
      ++counts[static_cast<std::size_t>(b)];
    }
    for (int b = 0; b < bins; ++b) {
      HistogramRow row;
      row.label = label;
      row.bin_left = lo + b * width;
      row.bin_right = b + 1 == bins ? hi : lo + (b + 1) * width;
      row.count = counts[static_cast<std::size_t>(b)];
      row.density = v.empty() ? 0.0 : static_cast<double>(row.count) / (static_cast<double>(v.size()) * width);
      out.push_back(row);
    }
  }
  return out;
}

void write_histogram_csv(std::ostream& out, const std::vector<HistogramRow>& rows) {
  out << "controller,bin_left,bin_right,count,density\n";
  for (const auto& r : rows) {
    out << r.label << ',' << format_number(r.bin_left) << ',' << format_number(r.bin_right) << ',' << r.count << ','
        << format_number(r.density) << '\n';
  }
}

void check_comparable(const std::vector<ExperimentConfig>& cfgs) {
  if (cfgs.size() < 2) throw ConfigError("", "compare needs at least two configs");
  const auto& ref = cfgs.front();
  for (std::size_t i = 1; i < cfgs.size(); ++i) {
    const auto& c = cfgs[i];
    const std::string who = "config " + std::to_string(i + 1);
    if (!(c.environment == ref.environment)) throw ConfigError("environment", who + " uses a different environment");
    if (!(c.task == ref.task)) throw ConfigError("task", who + " uses a different task");
    if (c.seeds != ref.seeds) throw ConfigError("seeds", who + " uses a different seed list");
    if (c.controller.simulations_per_step() != ref.controller.simulations_per_step()) {
      throw ConfigError("controller.samples", who + " has a different per-step simulation budget");
    }
  }
}

ComparisonReport compare_controllers(const std::vector<ExperimentConfig>& input, int bins, const fs::path& out_dir) {
  check_comparable(input);
  std::vector<ExperimentConfig> cfgs = input;
  // Distinct labels, so a controller can be compared against itself.
  std::map<std::string, int> seen;
  for (auto& c : cfgs) {
    const int n = ++seen[c.label];
    if (n > 1) c.label += "_" + std::to_string(n);
    if (!out_dir.empty()) c.output_dir = out_dir;
  }

  ComparisonReport report;
  report.seeds = cfgs.front().seeds;
  std::vector<ExperimentRecord> all;
  for (const auto& c : cfgs) {
    auto records = run_experiment(c, !out_dir.empty());
    report.labels.push_back(c.label);
    std::vector<double> totals;
    for (const auto& r : records) totals.push_back(r.failed ? std::numeric_limits<double>::infinity() : r.total_cost);
    report.totals.push_back(totals);
    report.medians.push_back(quantile(totals, 0.5));
    report.success_rate.push_back(summarize_totals(records).success_rate);
    all.insert(all.end(), records.begin(), records.end());
  }

  const std::size_t k = cfgs.size();
  report.wins.assign(k, 0.0);
  for (std::size_t s = 0; s < report.seeds.size(); ++s) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) best = std::min(best, report.totals[i][s]);
    std::vector<std::size_t> winners;
    for (std::size_t i = 0; i < k; ++i) {
      if (report.totals[i][s] == best) winners.push_back(i);
    }
    for (std::size_t i : winners) report.wins[i] += 1.0 / static_cast<double>(winners.size());
  }
  for (double w : report.wins) report.win_ratio.push_back(w / static_cast<double>(report.seeds.size()));
  report.histogram = summarize_costs(all, bins, false);
  if (!out_dir.empty()) write_comparison(out_dir, report);
  return report;
}

void write_comparison(const fs::path& dir, const ComparisonReport& report) {
  fs::create_directories(dir);
  std::ostringstream totals;
  totals << "seed";
  for (const auto& l : report.labels) totals << ',' << l;
  totals << '\n';
  for (std::size_t s = 0; s < report.seeds.size(); ++s) {
    totals << report.seeds[s];
    for (const auto& t : report.totals) totals << ',' << format_number(t[s]);
    totals << '\n';
  }
  write_file(dir / "comparison.csv", totals.str());

  std::ostringstream summary;
  summary << "controller,median_total_cost,wins,win_ratio,success_rate\n";
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    summary << report.labels[i] << ',' << format_number(report.medians[i]) << ',' << format_number(report.wins[i])
            << ',' << format_number(report.win_ratio[i]) << ',' << format_number(report.success_rate[i]) << '\n';
  }
  write_file(dir / "comparison_summary.csv", summary.str());

  std::ostringstream hist;
  write_histogram_csv(hist, report.histogram);
  write_file(dir / "cost_histogram.csv", hist.str());
}

std::string format_report(const ComparisonReport& report) {
  std::ostringstream s;
  s << "seeds: " << report.seeds.size() << '\n';
  for (std::size_t i = 0; i < report.labels.size(); ++i) {
    s << report.labels[i] << ": median total cost " << format_number(report.medians[i]) << ", wins "
      << format_number(report.wins[i]) << " (ratio " << format_number(report.win_ratio[i]) << "), success rate "
      << format_number(report.success_rate[i]) << '\n';
  }
  return s.str();
}

}  // namespace mpopi
