#pragma once

#include <Eigen/Core>

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mpopi/env.hpp"

namespace mpopi {

// Index of the active waypoint once every waypoint was reached equals the
// waypoint count. Stored as a state entry so transitions stay pure.
class WaypointTracker {
 public:
  explicit WaypointTracker(TaskSpec task);

  const TaskSpec& task() const { return task_; }
  std::size_t count() const { return task_.waypoints.size(); }
  const Waypoint& active(double index) const;
  bool done(double index) const { return static_cast<std::size_t>(index) >= count(); }
  double advance(double index, const Eigen::Vector2d& position) const;
  // Distance to the active waypoint plus the remaining path through the later
  // ones, so reaching a waypoint never raises the cost.
  double distance_to_go(double index, const Eigen::Vector2d& position) const;

 private:
  TaskSpec task_;
};

// ---------------------------------------------------------------------------
// double-integrator-2d: p'' = u with quadratic regulation cost. The terminal
// weight is the stationary Riccati solution, so a horizon-truncated rollout
// cost is exact for the infinite-horizon regulator.

struct DoubleIntegratorParams {
  double dt = 0.01;
  double position_weight = 1.0;
  double velocity_weight = 1.0;
  double effort_weight = 1.0;
  double control_limit = 50.0;
  Eigen::Vector2d initial_position{1.0, -0.5};
  Eigen::Vector2d initial_velocity{0.0, 0.0};
};

class DoubleIntegrator2d final : public Environment {
 public:
  DoubleIntegrator2d(DoubleIntegratorParams params, TaskSpec task);

  std::string name() const override { return "double-integrator-2d"; }
  int state_dim() const override { return 4; }
  State initial_state() const override;
  std::vector<std::string> state_labels() const override { return {"px", "py", "vx", "vy"}; }
  double terminal_cost(const State& x) const override;
  bool task_complete(const State& x) const override;

  const DoubleIntegratorParams& params() const { return params_; }
  Eigen::Vector2d goal() const { return goal_; }
  // Stationary cost-to-go matrix over the error state (p - goal, v).
  const Eigen::Matrix4d& terminal_weight() const { return terminal_; }

 protected:
  Transition advance(const State& x, const Control& u, double dt) const override;
  double cost(const State& x, const Control& u) const override;

 private:
  DoubleIntegratorParams params_;
  Eigen::Vector2d goal_;
  double tolerance_;
  Eigen::Matrix4d terminal_;
};

// ---------------------------------------------------------------------------
// point-mass-2d: damped point mass with a speed limit following waypoints.
// State: px, py, vx, vy, waypoint index. Controls are normalized forces.

struct PointMassParams {
  double dt = 0.02;
  int substeps = 2;
  double mass = 1.0;
  double force_max = 3.0;
  double damping = 1.5;
  double speed_limit = 1.0;
  Eigen::Vector2d initial_position{0.0, 0.0};
  CostWeights weights{};
};

class PointMass2d final : public Environment {
 public:
  PointMass2d(PointMassParams params, TaskSpec task);

  std::string name() const override { return "point-mass-2d"; }
  int state_dim() const override { return 5; }
  State initial_state() const override;
  std::vector<std::string> state_labels() const override { return {"px", "py", "vx", "vy", "waypoint"}; }
  double terminal_cost(const State& x) const override;
  bool task_complete(const State& x) const override { return tracker_.done(x[4]); }

 protected:
  Transition advance(const State& x, const Control& u, double dt) const override;
  double cost(const State& x, const Control& u) const override;

 private:
  PointMassParams params_;
  WaypointTracker tracker_;
};

// ---------------------------------------------------------------------------
// step-climber: sagittal (x, z) point mass over piecewise-constant terrain.
// Control 0 is a normalized horizontal force, control 1 a normalized
// vertical take-off impulse that only acts on the ground. Risers block
// horizontal motion; landing is inelastic.
// State: x, z, vx, vz, waypoint index.

struct Terrain {
  // (x_start, height) pairs, ascending in x_start. Height left of the first
  // breakpoint is 0.
  std::vector<std::pair<double, double>> breakpoints;

  double height(double x) const;
  static Terrain stairs(double start, double riser, double tread, int steps);
};

struct StepClimberParams {
  double dt = 0.02;
  int substeps = 5;
  double mass = 1.0;
  double gravity = 9.81;
  double force_max = 6.0;
  double impulse_max = 2.5;  // take-off speed at full control [m/s]
  double ground_damping = 3.0;
  double air_damping = 0.2;
  double riser = 0.15;
  double tread = 0.20;
  int steps = 3;
  double stairs_start = 1.0;
  std::vector<std::pair<double, double>> terrain;  // overrides the stairs when non-empty
  double x_min = -10.0;
  double x_max = 20.0;
  double z_max = 5.0;
  CostWeights weights{};
};

class StepClimber final : public Environment {
 public:
  StepClimber(StepClimberParams params, TaskSpec task);

  std::string name() const override { return "step-climber"; }
  int state_dim() const override { return 5; }
  State initial_state() const override;
  std::vector<std::string> state_labels() const override { return {"x", "z", "vx", "vz", "waypoint"}; }
  double terminal_cost(const State& x) const override;
  bool task_complete(const State& x) const override { return tracker_.done(x[4]); }

  const Terrain& terrain() const { return terrain_; }
  static TaskSpec default_task(const StepClimberParams& params);

 protected:
  Transition advance(const State& x, const Control& u, double dt) const override;
  double cost(const State& x, const Control& u) const override;

 private:
  StepClimberParams params_;
  Terrain terrain_;
  WaypointTracker tracker_;
};

// ---------------------------------------------------------------------------
// planar-pusher: disc robot pushing an axis-aligned square box
// quasi-statically. Controls are normalized robot velocities. The box is
// displaced along the contact normal by the penetration depth; tangential
// motion slides freely. Box mass scales the robot's speed while in contact.
// Waypoints are goals for the box. State: rx, ry, bx, by, waypoint index.

struct PusherParams {
  double dt = 0.02;
  int substeps = 4;
  double robot_radius = 0.15;
  double box_size = 0.36;
  double box_mass = 3.5;
  double push_capacity = 7.0;  // mass at which pushing halves robot speed [kg]
  double speed_max = 1.0;
  double contact_margin = 1e-6;
  double workspace = 10.0;
  Eigen::Vector2d robot_start{0.0, 0.0};
  Eigen::Vector2d box_start{1.0, 0.0};
  double approach_weight = 0.2;
  CostWeights weights{};
};

class PlanarPusher final : public Environment {
 public:
  PlanarPusher(PusherParams params, TaskSpec task);

  std::string name() const override { return "planar-pusher"; }
  int state_dim() const override { return 5; }
  State initial_state() const override;
  std::vector<std::string> state_labels() const override { return {"rx", "ry", "bx", "by", "waypoint"}; }
  double terminal_cost(const State& x) const override;
  bool task_complete(const State& x) const override { return tracker_.done(x[4]); }

  // Distance from the disc rim to the box surface (negative when overlapping).
  double clearance(const State& x) const;
  const PusherParams& params() const { return params_; }

 protected:
  Transition advance(const State& x, const Control& u, double dt) const override;
  double cost(const State& x, const Control& u) const override;

 private:
  PusherParams params_;
  WaypointTracker tracker_;
};

// ---------------------------------------------------------------------------
// pd-joint: horizontal two-link arm. Controls are joint position targets
// tracked by a PD torque loop running `substeps` times per controller period.
// Waypoints are end-effector goals. State: q1, q2, dq1, dq2, waypoint index.

struct PdJointParams {
  double dt = 0.02;
  int substeps = 10;
  Eigen::Vector2d link_length{0.5, 0.4};
  Eigen::Vector2d link_mass{1.0, 0.8};
  double kp = 40.0;
  double kd = 6.0;
  double joint_damping = 0.1;
  double target_limit = 3.14159;
  Eigen::Vector2d initial_angles{0.3, 0.6};
  CostWeights weights{};
};

class PdJointArm final : public Environment {
 public:
  PdJointArm(PdJointParams params, TaskSpec task);

  std::string name() const override { return "pd-joint"; }
  int state_dim() const override { return 5; }
  State initial_state() const override;
  std::vector<std::string> state_labels() const override { return {"q1", "q2", "dq1", "dq2", "waypoint"}; }
  double terminal_cost(const State& x) const override;
  bool task_complete(const State& x) const override { return tracker_.done(x[4]); }

  Eigen::Vector2d end_effector(const State& x) const;

 protected:
  Transition advance(const State& x, const Control& u, double dt) const override;
  double cost(const State& x, const Control& u) const override;

 private:
  PdJointParams params_;
  WaypointTracker tracker_;
};

// ---------------------------------------------------------------------------
// static-quadratic: no dynamics, cost = weight * |u - minimum|^2 per stage.
// A scalar bowl for checking distribution updates in isolation.

struct StaticQuadraticParams {
  Eigen::VectorXd minimum = Eigen::VectorXd::Zero(1);
  double weight = 1.0;
  double control_limit = 100.0;
};

class StaticQuadratic final : public Environment {
 public:
  explicit StaticQuadratic(StaticQuadraticParams params);

  std::string name() const override { return "static-quadratic"; }
  int state_dim() const override { return 1; }
  State initial_state() const override { return State::Zero(1); }
  std::vector<std::string> state_labels() const override { return {"unused"}; }
  double terminal_cost(const State&) const override { return 0.0; }
  bool task_complete(const State&) const override { return false; }

 protected:
  Transition advance(const State& x, const Control&, double) const override { return {x, true}; }
  double cost(const State& x, const Control& u) const override;

 private:
  StaticQuadraticParams params_;
};

// Names accepted by the experiment config.
std::vector<std::string> environment_names();

}  // namespace mpopi
