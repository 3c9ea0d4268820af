#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

namespace mpopi {

using State = Eigen::VectorXd;
using Control = Eigen::VectorXd;

struct Waypoint {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double tolerance = 0.1;
};

// Ordered goals for one episode. The last waypoint is the terminal goal.
struct TaskSpec {
  std::vector<Waypoint> waypoints;
  double target_speed = 0.0;

  void validate() const;
};

struct CostWeights {
  double waypoint = 1.0;
  double speed = 0.1;
  double effort = 0.01;
  double terminal = 1.0;
};

struct Transition {
  State state;
  bool valid = true;
};

/// A benchmark task: deterministic dynamics with per-stage and terminal costs.
///
/// Implementations are immutable after construction. All member functions
/// are const and may be called concurrently; rollouts own their state copies.
/// Controls are clamped to [control_lower, control_upper] before use, so an
/// out-of-bounds control behaves exactly like its clamp.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  int control_dim() const { return static_cast<int>(lower_.size()); }
  const Eigen::VectorXd& control_lower() const { return lower_; }
  const Eigen::VectorXd& control_upper() const { return upper_; }

  // Controller period and number of integrator substeps per period.
  double dt() const { return dt_; }
  int substeps() const { return substeps_; }

  virtual State initial_state() const = 0;
  virtual std::vector<std::string> state_labels() const = 0;

  Control clamp(const Eigen::Ref<const Control>& u) const { return u.cwiseMax(lower_).cwiseMin(upper_); }

  Transition transition(const State& x, const Eigen::Ref<const Control>& u, double dt) const {
    return advance(x, clamp(u), dt);
  }
  Transition transition(const State& x, const Eigen::Ref<const Control>& u) const {
    return advance(x, clamp(u), dt_);
  }
  double stage_cost(const State& x, const Eigen::Ref<const Control>& u) const { return cost(x, clamp(u)); }
  virtual double terminal_cost(const State& x) const = 0;

  // True once the task tolerance has been met.
  virtual bool task_complete(const State& x) const = 0;

 protected:
  Environment(Eigen::VectorXd lower, Eigen::VectorXd upper, double dt, int substeps)
      : lower_(std::move(lower)), upper_(std::move(upper)), dt_(dt), substeps_(substeps) {}

  virtual Transition advance(const State& x, const Control& u, double dt) const = 0;
  virtual double cost(const State& x, const Control& u) const = 0;

 private:
  Eigen::VectorXd lower_;
  Eigen::VectorXd upper_;
  double dt_;
  int substeps_;
};

}  // namespace mpopi
