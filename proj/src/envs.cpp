#include "mpopi/envs.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "mpopi/errors.hpp"

namespace mpopi {

void TaskSpec::validate() const {
  if (waypoints.empty()) throw InputError("task: at least one waypoint is required");
  for (const auto& w : waypoints) {
    if (!(w.tolerance > 0.0)) throw InputError("task: waypoint tolerance must be positive");
    if (!w.position.allFinite()) throw InputError("task: waypoint position must be finite");
  }
  if (!std::isfinite(target_speed) || target_speed < 0.0) {
    throw InputError("task: target speed must be finite and nonnegative");
  }
}

WaypointTracker::WaypointTracker(TaskSpec task) : task_(std::move(task)) { task_.validate(); }

const Waypoint& WaypointTracker::active(double index) const {
  const auto i = std::min(static_cast<std::size_t>(index), count() - 1);
  return task_.waypoints[i];
}

double WaypointTracker::advance(double index, const Eigen::Vector2d& position) const {
  auto i = static_cast<std::size_t>(index);
  while (i < count() && (position - task_.waypoints[i].position).norm() < task_.waypoints[i].tolerance) ++i;
  return static_cast<double>(i);
}

double WaypointTracker::distance_to_go(double index, const Eigen::Vector2d& position) const {
  const auto i = std::min(static_cast<std::size_t>(index), count() - 1);
  double d = (position - task_.waypoints[i].position).norm();
  for (std::size_t j = i + 1; j < count(); ++j) {
    d += (task_.waypoints[j].position - task_.waypoints[j - 1].position).norm();
  }
  return d;
}

namespace {

Eigen::VectorXd constant(int n, double v) { return Eigen::VectorXd::Constant(n, v); }

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InputError(std::string(what) + " must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------

DoubleIntegrator2d::DoubleIntegrator2d(DoubleIntegratorParams params, TaskSpec task)
    : Environment(constant(2, -params.control_limit), constant(2, params.control_limit), params.dt, 1),
      params_(std::move(params)) {
  check_positive(params_.dt, "double-integrator-2d: dt");
  check_positive(params_.effort_weight, "double-integrator-2d: effort_weight");
  if (task.waypoints.empty()) task.waypoints.push_back(Waypoint{Eigen::Vector2d::Zero(), 0.05});
  task.validate();
  goal_ = task.waypoints.back().position;
  tolerance_ = task.waypoints.back().tolerance;

  const double h = params_.dt;
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  a.topRightCorner<2, 2>() = h * Eigen::Matrix2d::Identity();
  Eigen::Matrix<double, 4, 2> b;
  b << h * h * Eigen::Matrix2d::Identity(), h * Eigen::Matrix2d::Identity();
  Eigen::Matrix4d q = Eigen::Vector4d(params_.position_weight, params_.position_weight, params_.velocity_weight,
                                      params_.velocity_weight)
                          .asDiagonal();
  const Eigen::Matrix2d r = params_.effort_weight * Eigen::Matrix2d::Identity();
  Eigen::Matrix4d p = q;
  for (int iter = 0; iter < 100000; ++iter) {
    const Eigen::Matrix2d s = r + b.transpose() * p * b;
    const Eigen::Matrix<double, 2, 4> gain = s.ldlt().solve(b.transpose() * p * a);
    Eigen::Matrix4d next = q + a.transpose() * p * a - a.transpose() * p * b * gain;
    next = (next + next.transpose()) / 2.0;
    const double change = (next - p).cwiseAbs().maxCoeff();
    p = next;
    if (change < 1e-14 * std::max(1.0, p.cwiseAbs().maxCoeff())) break;
  }
  terminal_ = p;
}

State DoubleIntegrator2d::initial_state() const {
  State x(4);
  x << params_.initial_position, params_.initial_velocity;
  return x;
}

Transition DoubleIntegrator2d::advance(const State& x, const Control& u, double dt) const {
  State next = x;
  next.segment<2>(2) += u * dt;
  next.head<2>() += next.segment<2>(2) * dt;
  const bool valid = next.allFinite();
  return {std::move(next), valid};
}

double DoubleIntegrator2d::cost(const State& x, const Control& u) const {
  return params_.position_weight * (x.head<2>() - goal_).squaredNorm() +
         params_.velocity_weight * x.segment<2>(2).squaredNorm() + params_.effort_weight * u.squaredNorm();
}

double DoubleIntegrator2d::terminal_cost(const State& x) const {
  Eigen::Vector4d e;
  e << x.head<2>() - goal_, x.segment<2>(2);
  return e.dot(terminal_ * e);
}

bool DoubleIntegrator2d::task_complete(const State& x) const {
  return (x.head<2>() - goal_).norm() < tolerance_ && x.segment<2>(2).norm() < tolerance_;
}

// ---------------------------------------------------------------------------

PointMass2d::PointMass2d(PointMassParams params, TaskSpec task)
    : Environment(constant(2, -1.0), constant(2, 1.0), params.dt, params.substeps),
      params_(std::move(params)),
      tracker_(std::move(task)) {
  check_positive(params_.dt, "point-mass-2d: dt");
  check_positive(params_.mass, "point-mass-2d: mass");
  check_positive(params_.speed_limit, "point-mass-2d: speed_limit");
  if (params_.substeps < 1) throw InputError("point-mass-2d: substeps must be at least 1");
}

State PointMass2d::initial_state() const {
  State x = State::Zero(5);
  x.head<2>() = params_.initial_position;
  x[4] = tracker_.advance(0.0, params_.initial_position);
  return x;
}

Transition PointMass2d::advance(const State& x, const Control& u, double dt) const {
  const double h = dt / params_.substeps;
  Eigen::Vector2d p = x.head<2>();
  Eigen::Vector2d v = x.segment<2>(2);
  double index = x[4];
  for (int i = 0; i < params_.substeps; ++i) {
    v += (params_.force_max * u / params_.mass - params_.damping * v) * h;
    const double speed = v.norm();
    if (speed > params_.speed_limit) v *= params_.speed_limit / speed;
    p += v * h;
    index = tracker_.advance(index, p);
  }
  State next(5);
  next << p, v, index;
  return {std::move(next), p.allFinite() && v.allFinite()};
}

double PointMass2d::cost(const State& x, const Control& u) const {
  const auto& w = params_.weights;
  const bool done = tracker_.done(x[4]);
  const double speed_target = done ? 0.0 : tracker_.task().target_speed;
  const double speed_error = x.segment<2>(2).norm() - speed_target;
  return w.waypoint * std::pow(tracker_.distance_to_go(x[4], x.head<2>()), 2) +
         w.speed * speed_error * speed_error + w.effort * u.squaredNorm();
}

double PointMass2d::terminal_cost(const State& x) const {
  return params_.weights.terminal * std::pow(tracker_.distance_to_go(x[4], x.head<2>()), 2);
}

// ---------------------------------------------------------------------------

double Terrain::height(double x) const {
  double h = 0.0;
  for (const auto& [start, height] : breakpoints) {
    if (x < start) break;
    h = height;
  }
  return h;
}

Terrain Terrain::stairs(double start, double riser, double tread, int steps) {
  Terrain t;
  for (int i = 0; i < steps; ++i) t.breakpoints.emplace_back(start + i * tread, riser * (i + 1));
  return t;
}

StepClimber::StepClimber(StepClimberParams params, TaskSpec task)
    : Environment(constant(2, -1.0), constant(2, 1.0), params.dt, params.substeps),
      params_(std::move(params)),
      terrain_(params_.terrain.empty()
                   ? Terrain::stairs(params_.stairs_start, params_.riser, params_.tread, params_.steps)
                   : Terrain{params_.terrain}),
      tracker_(task.waypoints.empty() ? default_task(params_) : std::move(task)) {
  check_positive(params_.dt, "step-climber: dt");
  check_positive(params_.mass, "step-climber: mass");
  if (params_.substeps < 1) throw InputError("step-climber: substeps must be at least 1");
  if (params_.ground_damping < 0.0 || params_.air_damping < 0.0) {
    throw InputError("step-climber: damping must be nonnegative");
  }
  for (std::size_t i = 1; i < terrain_.breakpoints.size(); ++i) {
    if (terrain_.breakpoints[i].first <= terrain_.breakpoints[i - 1].first) {
      throw InputError("step-climber: terrain breakpoints must be strictly ascending");
    }
  }
}

TaskSpec StepClimber::default_task(const StepClimberParams& params) {
  TaskSpec task;
  task.target_speed = 0.5;
  task.waypoints.push_back({{params.stairs_start - 0.4, 0.0}, 0.1});
  for (int i = 0; i < params.steps; ++i) {
    task.waypoints.push_back({{params.stairs_start + params.tread * (i + 0.5), params.riser * (i + 1)}, 0.1});
  }
  task.waypoints.push_back(
      {{params.stairs_start + params.tread * params.steps + 0.4, params.riser * params.steps}, 0.1});
  return task;
}

State StepClimber::initial_state() const {
  State x = State::Zero(5);
  x[1] = terrain_.height(0.0);
  x[4] = tracker_.advance(0.0, x.head<2>());
  return x;
}

Transition StepClimber::advance(const State& x, const Control& u, double dt) const {
  constexpr double kContact = 1e-9;
  const double h = dt / params_.substeps;
  double px = x[0], pz = x[1], vx = x[2], vz = x[3], index = x[4];
  for (int i = 0; i < params_.substeps; ++i) {
    const double ground = terrain_.height(px);
    const bool grounded = pz <= ground + kContact && vz <= 0.0;
    if (i == 0 && grounded && u[1] > 0.0) vz += u[1] * params_.impulse_max;
    const bool airborne = pz > ground + kContact || vz > 0.0;

    const double damping = airborne ? params_.air_damping : params_.ground_damping;
    vx += (params_.force_max * u[0] / params_.mass - damping * vx) * h;
    const double nx = px + vx * h;
    if (terrain_.height(nx) > pz + kContact) {
      vx = 0.0;  // blocked by a riser
    } else {
      px = nx;
    }

    if (airborne) {
      vz -= params_.gravity * h;
      pz += vz * h;
    } else {
      vz = 0.0;
    }
    const double floor = terrain_.height(px);
    if (pz < floor) {
      pz = floor;
      vz = 0.0;
    }
    index = tracker_.advance(index, Eigen::Vector2d(px, pz));
  }
  State next(5);
  next << px, pz, vx, vz, index;
  const bool valid = next.allFinite() && px >= params_.x_min && px <= params_.x_max && pz <= params_.z_max;
  return {std::move(next), valid};
}

double StepClimber::cost(const State& x, const Control& u) const {
  const auto& w = params_.weights;
  const bool done = tracker_.done(x[4]);
  const double speed_error = x[2] - (done ? 0.0 : tracker_.task().target_speed);
  return w.waypoint * std::pow(tracker_.distance_to_go(x[4], x.head<2>()), 2) +
         w.speed * speed_error * speed_error + w.effort * u.squaredNorm();
}

double StepClimber::terminal_cost(const State& x) const {
  return params_.weights.terminal * std::pow(tracker_.distance_to_go(x[4], x.head<2>()), 2);
}

// ---------------------------------------------------------------------------

namespace {

struct BoxContact {
  Eigen::Vector2d normal;  // unit, from box towards disc centre
  double distance;         // disc centre to box surface; <= 0 when inside
};

BoxContact box_contact(const Eigen::Vector2d& robot, const Eigen::Vector2d& box, double half) {
  const Eigen::Vector2d rel = robot - box;
  const Eigen::Vector2d closest = rel.cwiseMax(-half).cwiseMin(half);
  const Eigen::Vector2d d = rel - closest;
  const double dist = d.norm();
  if (dist > 0.0) return {d / dist, dist};
  // Centre inside the box: leave through the nearest face.
  const Eigen::Vector2d depth = Eigen::Vector2d::Constant(half) - rel.cwiseAbs();
  Eigen::Index axis = 0;
  depth.minCoeff(&axis);
  Eigen::Vector2d n = Eigen::Vector2d::Zero();
  n[axis] = rel[axis] >= 0.0 ? 1.0 : -1.0;
  return {n, -depth[axis]};
}

}  // namespace

PlanarPusher::PlanarPusher(PusherParams params, TaskSpec task)
    : Environment(constant(2, -1.0), constant(2, 1.0), params.dt, params.substeps),
      params_(std::move(params)),
      tracker_(std::move(task)) {
  check_positive(params_.dt, "planar-pusher: dt");
  check_positive(params_.robot_radius, "planar-pusher: robot_radius");
  check_positive(params_.box_size, "planar-pusher: box_size");
  check_positive(params_.box_mass, "planar-pusher: box_mass");
  check_positive(params_.push_capacity, "planar-pusher: push_capacity");
  if (params_.substeps < 1) throw InputError("planar-pusher: substeps must be at least 1");
}

State PlanarPusher::initial_state() const {
  State x(5);
  x << params_.robot_start, params_.box_start, 0.0;
  x[4] = tracker_.advance(0.0, params_.box_start);
  return x;
}

double PlanarPusher::clearance(const State& x) const {
  return box_contact(x.head<2>(), x.segment<2>(2), params_.box_size / 2).distance - params_.robot_radius;
}

Transition PlanarPusher::advance(const State& x, const Control& u, double dt) const {
  const double h = dt / params_.substeps;
  const double half = params_.box_size / 2;
  const double slowdown = 1.0 / (1.0 + params_.box_mass / params_.push_capacity);
  Eigen::Vector2d robot = x.head<2>();
  Eigen::Vector2d box = x.segment<2>(2);
  double index = x[4];
  for (int i = 0; i < params_.substeps; ++i) {
    Eigen::Vector2d v = params_.speed_max * u;
    if (box_contact(robot, box, half).distance < params_.robot_radius + params_.contact_margin) v *= slowdown;
    robot += v * h;
    const BoxContact c = box_contact(robot, box, half);
    if (c.distance < params_.robot_radius) box -= c.normal * (params_.robot_radius - c.distance);
    index = tracker_.advance(index, box);
  }
  State next(5);
  next << robot, box, index;
  const bool valid = next.allFinite() && robot.cwiseAbs().maxCoeff() <= params_.workspace &&
                     box.cwiseAbs().maxCoeff() <= params_.workspace;
  return {std::move(next), valid};
}

double PlanarPusher::cost(const State& x, const Control& u) const {
  const auto& w = params_.weights;
  const Eigen::Vector2d box = x.segment<2>(2);
  const Eigen::Vector2d goal = tracker_.active(x[4]).position;
  const Eigen::Vector2d to_goal = goal - box;
  const double gap = to_goal.norm();
  const Eigen::Vector2d heading = gap > 1e-9 ? Eigen::Vector2d(to_goal / gap) : Eigen::Vector2d::Zero();
  const Eigen::Vector2d behind = box - heading * (params_.box_size / 2 + params_.robot_radius);
  return w.waypoint * std::pow(tracker_.distance_to_go(x[4], box), 2) +
         params_.approach_weight * (x.head<2>() - behind).squaredNorm() + w.effort * u.squaredNorm();
}

double PlanarPusher::terminal_cost(const State& x) const {
  return params_.weights.terminal * std::pow(tracker_.distance_to_go(x[4], x.segment<2>(2)), 2);
}

// ---------------------------------------------------------------------------

PdJointArm::PdJointArm(PdJointParams params, TaskSpec task)
    : Environment(constant(2, -params.target_limit), constant(2, params.target_limit), params.dt, params.substeps),
      params_(std::move(params)),
      tracker_(std::move(task)) {
  check_positive(params_.dt, "pd-joint: dt");
  if (params_.substeps < 1) throw InputError("pd-joint: substeps must be at least 1");
  if ((params_.link_length.array() <= 0.0).any() || (params_.link_mass.array() <= 0.0).any()) {
    throw InputError("pd-joint: link lengths and masses must be positive");
  }
}

State PdJointArm::initial_state() const {
  State x = State::Zero(5);
  x.head<2>() = params_.initial_angles;
  x[4] = tracker_.advance(0.0, end_effector(x));
  return x;
}

Eigen::Vector2d PdJointArm::end_effector(const State& x) const {
  const double l1 = params_.link_length[0], l2 = params_.link_length[1];
  return {l1 * std::cos(x[0]) + l2 * std::cos(x[0] + x[1]), l1 * std::sin(x[0]) + l2 * std::sin(x[0] + x[1])};
}

Transition PdJointArm::advance(const State& x, const Control& u, double dt) const {
  const double h = dt / params_.substeps;
  const double l1 = params_.link_length[0], l2 = params_.link_length[1];
  const double m1 = params_.link_mass[0], m2 = params_.link_mass[1];
  Eigen::Vector2d q = x.head<2>();
  Eigen::Vector2d dq = x.segment<2>(2);
  double index = x[4];
  for (int i = 0; i < params_.substeps; ++i) {
    const Eigen::Vector2d torque = params_.kp * (u - q) - params_.kd * dq;
    const double c2 = std::cos(q[1]), s2 = std::sin(q[1]);
    Eigen::Matrix2d inertia;
    inertia(0, 0) = (m1 + m2) * l1 * l1 + m2 * l2 * l2 + 2 * m2 * l1 * l2 * c2;
    inertia(0, 1) = inertia(1, 0) = m2 * l2 * l2 + m2 * l1 * l2 * c2;
    inertia(1, 1) = m2 * l2 * l2;
    const double k = m2 * l1 * l2 * s2;
    const Eigen::Vector2d coriolis(-k * (2 * dq[0] * dq[1] + dq[1] * dq[1]), k * dq[0] * dq[0]);
    const Eigen::Vector2d ddq = inertia.ldlt().solve(torque - coriolis - params_.joint_damping * dq);
    dq += ddq * h;
    q += dq * h;
  }
  State next(5);
  next << q, dq, index;
  next[4] = tracker_.advance(index, end_effector(next));
  return {std::move(next), q.allFinite() && dq.allFinite()};
}

double PdJointArm::cost(const State& x, const Control& u) const {
  const auto& w = params_.weights;
  const double l1 = params_.link_length[0], l2 = params_.link_length[1];
  Eigen::Matrix2d jac;
  jac << -l1 * std::sin(x[0]) - l2 * std::sin(x[0] + x[1]), -l2 * std::sin(x[0] + x[1]),
      l1 * std::cos(x[0]) + l2 * std::cos(x[0] + x[1]), l2 * std::cos(x[0] + x[1]);
  const bool done = tracker_.done(x[4]);
  const double speed_error = (jac * x.segment<2>(2)).norm() - (done ? 0.0 : tracker_.task().target_speed);
  return w.waypoint * std::pow(tracker_.distance_to_go(x[4], end_effector(x)), 2) +
         w.speed * speed_error * speed_error + w.effort * (u - x.head<2>()).squaredNorm();
}

double PdJointArm::terminal_cost(const State& x) const {
  return params_.weights.terminal * std::pow(tracker_.distance_to_go(x[4], end_effector(x)), 2);
}

// ---------------------------------------------------------------------------

StaticQuadratic::StaticQuadratic(StaticQuadraticParams params)
    : Environment(constant(static_cast<int>(params.minimum.size()), -params.control_limit),
                  constant(static_cast<int>(params.minimum.size()), params.control_limit), 1.0, 1),
      params_(std::move(params)) {
  if (params_.minimum.size() < 1) throw InputError("static-quadratic: minimum must be non-empty");
}

double StaticQuadratic::cost(const State&, const Control& u) const {
  return params_.weight * (u - params_.minimum).squaredNorm();
}

std::vector<std::string> environment_names() {
  return {"double-integrator-2d", "point-mass-2d", "step-climber", "planar-pusher", "pd-joint", "static-quadratic"};
}

}  // namespace mpopi
