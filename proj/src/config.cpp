#include <fstream>
#include <sstream>

#include "mpopi/envs.hpp"
#include "mpopi/errors.hpp"
#include "mpopi/experiment.hpp"

namespace mpopi {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and rejects any key it was not asked for.
class StrictObject {
 public:
  StrictObject(const json& value, std::string path) : value_(value), path_(std::move(path)) {
    if (!value_.is_object()) throw ConfigError(path_, "expected an object");
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    const auto it = value_.find(key);
    if (it == value_.end()) return nullptr;
    used_.push_back(key);
    return &*it;
  }

  void get(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key), "expected a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(key_path(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  void get(const std::string& key, Eigen::VectorXd& out, Eigen::Index size = -1) {
    if (const json* v = find(key)) {
      if (!v->is_array() || (size >= 0 && static_cast<Eigen::Index>(v->size()) != size)) {
        throw ConfigError(key_path(key), size >= 0 ? "expected an array of " + std::to_string(size) + " numbers"
                                                   : "expected an array of numbers");
      }
      out.resize(static_cast<Eigen::Index>(v->size()));
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(key_path(key), "expected an array of numbers");
        out[static_cast<Eigen::Index>(i)] = (*v)[i].get<double>();
      }
    }
  }
  void get(const std::string& key, Eigen::Vector2d& out) {
    Eigen::VectorXd tmp = out;
    get(key, tmp, 2);
    out = tmp;
  }

  void finish() const {
    for (auto it = value_.begin(); it != value_.end(); ++it) {
      if (std::find(used_.begin(), used_.end(), it.key()) == used_.end()) {
        throw ConfigError(key_path(it.key()), "unknown key");
      }
    }
  }

 private:
  const json& value_;
  std::string path_;
  std::vector<std::string> used_;
};

void read_weights(StrictObject& params, CostWeights& w) {
  if (const json* v = params.find("weights")) {
    StrictObject o(*v, params.key_path("weights"));
    o.get("waypoint", w.waypoint);
    o.get("speed", w.speed);
    o.get("effort", w.effort);
    o.get("terminal", w.terminal);
    o.finish();
  }
}

TaskSpec default_task(const std::string& env) {
  TaskSpec t;
  if (env == "point-mass-2d") {
    t.target_speed = 0.5;
    t.waypoints = {{{1.0, 0.0}, 0.1}, {{2.0, 0.5}, 0.1}, {{3.0, 0.5}, 0.1}};
  } else if (env == "planar-pusher") {
    t.waypoints = {{{2.0, 0.0}, 0.2}, {{3.0, 0.0}, 0.2}};
  } else if (env == "pd-joint") {
    t.waypoints = {{{0.2, 0.6}, 0.05}};
  }
  return t;
}

std::unique_ptr<Environment> build_environment(const EnvironmentSpec& spec, TaskSpec task) {
  const std::string base = "environment.params";
  StrictObject p(spec.params, base);
  std::unique_ptr<Environment> env;
  if (task.waypoints.empty()) task = default_task(spec.name);
  if (spec.name == "double-integrator-2d") {
    DoubleIntegratorParams d;
    p.get("dt", d.dt);
    p.get("position_weight", d.position_weight);
    p.get("velocity_weight", d.velocity_weight);
    p.get("effort_weight", d.effort_weight);
    p.get("control_limit", d.control_limit);
    p.get("initial_position", d.initial_position);
    p.get("initial_velocity", d.initial_velocity);
    p.finish();
    env = std::make_unique<DoubleIntegrator2d>(d, task);
  } else if (spec.name == "point-mass-2d") {
    PointMassParams d;
    p.get("dt", d.dt);
    p.get("substeps", d.substeps);
    p.get("mass", d.mass);
    p.get("force_max", d.force_max);
    p.get("damping", d.damping);
    p.get("speed_limit", d.speed_limit);
    p.get("initial_position", d.initial_position);
    read_weights(p, d.weights);
    p.finish();
    env = std::make_unique<PointMass2d>(d, task);
  } else if (spec.name == "step-climber") {
    StepClimberParams d;
    p.get("dt", d.dt);
    p.get("substeps", d.substeps);
    p.get("mass", d.mass);
    p.get("gravity", d.gravity);
    p.get("force_max", d.force_max);
    p.get("impulse_max", d.impulse_max);
    p.get("ground_damping", d.ground_damping);
    p.get("air_damping", d.air_damping);
    p.get("riser", d.riser);
    p.get("tread", d.tread);
    p.get("steps", d.steps);
    p.get("stairs_start", d.stairs_start);
    p.get("x_min", d.x_min);
    p.get("x_max", d.x_max);
    p.get("z_max", d.z_max);
    if (const json* v = p.find("terrain")) {
      const std::string key = p.key_path("terrain");
      if (!v->is_array()) throw ConfigError(key, "expected an array of [x_start, height] pairs");
      for (const auto& e : *v) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
          throw ConfigError(key, "expected an array of [x_start, height] pairs");
        }
        d.terrain.emplace_back(e[0].get<double>(), e[1].get<double>());
      }
    }
    read_weights(p, d.weights);
    p.finish();
    env = std::make_unique<StepClimber>(d, task);
  } else if (spec.name == "planar-pusher") {
    PusherParams d;
    p.get("dt", d.dt);
    p.get("substeps", d.substeps);
    p.get("robot_radius", d.robot_radius);
    p.get("box_size", d.box_size);
    p.get("box_mass", d.box_mass);
    p.get("push_capacity", d.push_capacity);
    p.get("speed_max", d.speed_max);
    p.get("contact_margin", d.contact_margin);
    p.get("workspace", d.workspace);
    p.get("robot_start", d.robot_start);
    p.get("box_start", d.box_start);
    p.get("approach_weight", d.approach_weight);
    read_weights(p, d.weights);
    p.finish();
    env = std::make_unique<PlanarPusher>(d, task);
  } else if (spec.name == "pd-joint") {
    PdJointParams d;
    p.get("dt", d.dt);
    p.get("substeps", d.substeps);
    p.get("link_length", d.link_length);
    p.get("link_mass", d.link_mass);
    p.get("kp", d.kp);
    p.get("kd", d.kd);
    p.get("joint_damping", d.joint_damping);
    p.get("target_limit", d.target_limit);
    p.get("initial_angles", d.initial_angles);
    read_weights(p, d.weights);
    p.finish();
    env = std::make_unique<PdJointArm>(d, task);
  } else if (spec.name == "static-quadratic") {
    StaticQuadraticParams d;
    p.get("minimum", d.minimum);
    p.get("weight", d.weight);
    p.get("control_limit", d.control_limit);
    p.finish();
    env = std::make_unique<StaticQuadratic>(d);
  } else {
    throw ConfigError("environment.name", "unknown environment '" + spec.name + "'");
  }
  return env;
}

ShiftFill parse_fill(const std::string& s, const std::string& key) {
  if (s == "repeat-last") return ShiftFill::RepeatLast;
  if (s == "zero") return ShiftFill::Zero;
  throw ConfigError(key, "expected 'repeat-last' or 'zero'");
}

CovarianceMode parse_mode(const std::string& s, const std::string& key) {
  if (s == "shared") return CovarianceMode::Shared;
  if (s == "per-timestep") return CovarianceMode::PerTimestep;
  throw ConfigError(key, "expected 'shared' or 'per-timestep'");
}

InnerCenter parse_center(const std::string& s, const std::string& key) {
  if (s == "outer-mean") return InnerCenter::OuterMean;
  if (s == "cycle-mean") return InnerCenter::CycleMean;
  throw ConfigError(key, "expected 'outer-mean' or 'cycle-mean'");
}

ControllerConfig parse_controller(const json& value) {
  StrictObject o(value, "controller");
  ControllerConfig c;
  std::string type;
  o.get("type", type);
  if (type.empty()) throw ConfigError("controller.type", "missing controller type");
  try {
    c.type = controller_type_from_string(type);
  } catch (const ParameterError&) {
    throw ConfigError("controller.type", "expected one of mppi, cma, ce, mpopi");
  }
  o.get("samples", c.samples);
  o.get("horizon", c.horizon);
  o.get("lambda", c.temperature);
  o.get("alpha", c.learning_rate);
  o.get("cycles", c.cycles);
  o.get("elites", c.elites);
  o.get("cov_floor", c.cov_floor);
  o.get("init_scale", c.init_scale);
  std::string s;
  if (o.find("shift_fill")) {
    o.get("shift_fill", s);
    c.shift_fill = parse_fill(s, "controller.shift_fill");
  }
  if (o.find("covariance_mode")) {
    o.get("covariance_mode", s);
    c.covariance_mode = parse_mode(s, "controller.covariance_mode");
    c.covariance_mode_set = true;
  }
  o.get("reset_cov", c.reset_covariance);
  if (o.find("inner_center")) {
    o.get("inner_center", s);
    c.inner_center = parse_center(s, "controller.inner_center");
  }
  o.finish();
  try {
    c.validate();
  } catch (const ParameterError& e) {
    throw ConfigError("controller." + e.field(), e.what());
  }
  return c;
}

TaskSpec parse_task(const json& value) {
  StrictObject o(value, "task");
  TaskSpec t;
  o.get("target_speed", t.target_speed);
  if (const json* w = o.find("waypoints")) {
    if (!w->is_array()) throw ConfigError("task.waypoints", "expected an array");
    for (std::size_t i = 0; i < w->size(); ++i) {
      StrictObject p((*w)[i], "task.waypoints[" + std::to_string(i) + "]");
      Waypoint wp;
      p.get("x", wp.position.x());
      p.get("y", wp.position.y());
      p.get("tolerance", wp.tolerance);
      p.finish();
      t.waypoints.push_back(wp);
    }
  }
  o.finish();
  if (t.waypoints.empty()) throw ConfigError("task.waypoints", "at least one waypoint is required");
  try {
    t.validate();
  } catch (const InputError& e) {
    throw ConfigError("task", e.what());
  }
  return t;
}

const char* fill_name(ShiftFill f) { return f == ShiftFill::Zero ? "zero" : "repeat-last"; }
const char* mode_name(CovarianceMode m) { return m == CovarianceMode::Shared ? "shared" : "per-timestep"; }
const char* center_name(InnerCenter c) { return c == InnerCenter::CycleMean ? "cycle-mean" : "outer-mean"; }

}  // namespace

std::unique_ptr<Environment> ExperimentConfig::make_environment() const {
  return build_environment(environment, task);
}

bool operator==(const TaskSpec& a, const TaskSpec& b) {
  if (a.target_speed != b.target_speed || a.waypoints.size() != b.waypoints.size()) return false;
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
    if (a.waypoints[i].position != b.waypoints[i].position || a.waypoints[i].tolerance != b.waypoints[i].tolerance) {
      return false;
    }
  }
  return true;
}

bool operator==(const ControllerConfig& a, const ControllerConfig& b) {
  return a.type == b.type && a.samples == b.samples && a.horizon == b.horizon && a.temperature == b.temperature &&
         a.learning_rate == b.learning_rate && a.cycles == b.cycles && a.elites == b.elites &&
         a.cov_floor == b.cov_floor && a.init_scale == b.init_scale && a.shift_fill == b.shift_fill &&
         a.effective_covariance_mode() == b.effective_covariance_mode() &&
         a.reset_covariance == b.reset_covariance && a.inner_center == b.inner_center;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return a.label == b.label && a.environment == b.environment && a.task == b.task && a.controller == b.controller &&
         a.episode_steps == b.episode_steps && a.stop_on_goal == b.stop_on_goal && a.seeds == b.seeds &&
         a.workers == b.workers && a.output_dir == b.output_dir;
}

ExperimentConfig parse_config(const json& doc) {
  StrictObject root(doc, "");
  ExperimentConfig cfg;

  const json* env = root.find("environment");
  if (!env) throw ConfigError("environment", "missing environment section");
  {
    StrictObject e(*env, "environment");
    e.get("name", cfg.environment.name);
    if (cfg.environment.name.empty()) throw ConfigError("environment.name", "missing environment name");
    if (const json* p = e.find("params")) {
      if (!p->is_object()) throw ConfigError("environment.params", "expected an object");
      cfg.environment.params = *p;
    }
    e.finish();
  }
  if (const json* t = root.find("task")) cfg.task = parse_task(*t);

  const json* ctrl = root.find("controller");
  if (!ctrl) throw ConfigError("controller", "missing controller section");
  cfg.controller = parse_controller(*ctrl);

  root.get("label", cfg.label);
  if (cfg.label.empty()) cfg.label = to_string(cfg.controller.type);
  if (cfg.label.find_first_of("/\\ ") != std::string::npos) throw ConfigError("label", "must not contain separators");
  root.get("episode_steps", cfg.episode_steps);
  if (cfg.episode_steps < 0) throw ConfigError("episode_steps", "must be nonnegative");
  root.get("stop_on_goal", cfg.stop_on_goal);
  if (const json* s = root.find("seeds")) {
    cfg.seeds.clear();
    if (s->is_array()) {
      for (const auto& v : *s) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
          throw ConfigError("seeds", "expected nonnegative integers");
        }
        cfg.seeds.push_back(v.get<std::uint64_t>());
      }
    } else if (s->is_object()) {
      StrictObject o(*s, "seeds");
      int first = 0, count = 0;
      o.get("first", first);
      o.get("count", count);
      o.finish();
      if (first < 0 || count < 1) throw ConfigError("seeds", "need first >= 0 and count >= 1");
      for (int i = 0; i < count; ++i) cfg.seeds.push_back(static_cast<std::uint64_t>(first + i));
    } else {
      throw ConfigError("seeds", "expected an array or {first, count}");
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  }
  int workers = static_cast<int>(cfg.workers);
  root.get("workers", workers);
  if (workers < 0) throw ConfigError("workers", "must be nonnegative");
  cfg.workers = static_cast<unsigned>(workers);
  std::string out = cfg.output_dir.string();
  root.get("output_dir", out);
  cfg.output_dir = out;
  root.finish();

  std::unique_ptr<Environment> probe;
  try {
    probe = cfg.make_environment();
  } catch (const InputError& e) {
    throw ConfigError("environment.params", e.what());
  }
  if (cfg.controller.type == ControllerType::Mpopi && cfg.controller.elites > cfg.controller.cycle_samples(0)) {
    throw ConfigError("controller.elites", "exceeds samples / cycles");
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigFileError("", "cannot open config file '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigParseError("", "cannot parse '" + path.string() + "': " + e.what());
  }
  return parse_config(doc);
}

json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["label"] = cfg.label;
  doc["environment"] = {{"name", cfg.environment.name}, {"params", cfg.environment.params}};
  if (!cfg.task.waypoints.empty()) {
    json wps = json::array();
    for (const auto& w : cfg.task.waypoints) {
      wps.push_back({{"x", w.position.x()}, {"y", w.position.y()}, {"tolerance", w.tolerance}});
    }
    doc["task"] = {{"waypoints", wps}, {"target_speed", cfg.task.target_speed}};
  }
  const auto& c = cfg.controller;
  doc["controller"] = {{"type", to_string(c.type)},
                       {"samples", c.samples},
                       {"horizon", c.horizon},
                       {"lambda", c.temperature},
                       {"alpha", c.learning_rate},
                       {"cycles", c.cycles},
                       {"elites", c.elites},
                       {"cov_floor", c.cov_floor},
                       {"init_scale", c.init_scale},
                       {"shift_fill", fill_name(c.shift_fill)},
                       {"covariance_mode", mode_name(c.effective_covariance_mode())},
                       {"reset_cov", c.reset_covariance},
                       {"inner_center", center_name(c.inner_center)}};
  doc["episode_steps"] = cfg.episode_steps;
  doc["stop_on_goal"] = cfg.stop_on_goal;
  doc["seeds"] = cfg.seeds;
  doc["workers"] = cfg.workers;
  doc["output_dir"] = cfg.output_dir.string();
  return doc;
}

}  // namespace mpopi
