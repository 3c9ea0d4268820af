#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "mpopi/env.hpp"

namespace mpopi::testing {

// Scalar integrator x' = x + u * dt with a configurable stage-cost offset.
// Transitions are invalid once |x| exceeds `limit`.
class LineEnv final : public Environment {
 public:
  explicit LineEnv(double offset = 0.0, double limit = 1e9, double bound = 10.0)
      : Environment(Eigen::VectorXd::Constant(1, -bound), Eigen::VectorXd::Constant(1, bound), 0.1, 1),
        offset_(offset),
        limit_(limit) {}

  std::string name() const override { return "line"; }
  int state_dim() const override { return 1; }
  State initial_state() const override { return State::Constant(1, 1.0); }
  std::vector<std::string> state_labels() const override { return {"x"}; }
  double terminal_cost(const State& x) const override { return x.squaredNorm(); }
  bool task_complete(const State&) const override { return false; }

 protected:
  Transition advance(const State& x, const Control& u, double dt) const override {
    State next = x + dt * u;
    return {next, std::abs(next[0]) <= limit_};
  }
  double cost(const State& x, const Control& u) const override {
    return offset_ + x.squaredNorm() + 0.1 * u.squaredNorm();
  }

 private:
  double offset_;
  double limit_;
};

// Every stage costs `c` and there is no terminal cost. Two controls.
class ConstantCostEnv final : public Environment {
 public:
  explicit ConstantCostEnv(double c, double lower = -1.0, double upper = 1.0)
      : Environment(Eigen::VectorXd::Constant(2, lower), Eigen::VectorXd::Constant(2, upper), 0.1, 1), c_(c) {}

  std::string name() const override { return "constant"; }
  int state_dim() const override { return 1; }
  State initial_state() const override { return State::Zero(1); }
  std::vector<std::string> state_labels() const override { return {"x"}; }
  double terminal_cost(const State&) const override { return 0.0; }
  bool task_complete(const State&) const override { return false; }

 protected:
  Transition advance(const State& x, const Control&, double) const override { return {x, true}; }
  double cost(const State&, const Control&) const override { return c_; }

 private:
  double c_;
};

}  // namespace mpopi::testing
