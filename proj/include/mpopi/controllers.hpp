#pragma once

#include <Eigen/Core>

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mpopi/env.hpp"
#include "mpopi/policy.hpp"
#include "mpopi/random.hpp"
#include "mpopi/rollout.hpp"

namespace mpopi {

enum class ControllerType { Mppi, Cma, Ce, Mpopi };
// Mean that inner MPOPI covariance updates are centred on.
enum class InnerCenter { OuterMean, CycleMean };

std::string to_string(ControllerType type);
ControllerType controller_type_from_string(const std::string& name);

struct ControllerConfig {
  ControllerType type = ControllerType::Mpopi;
  int samples = 30;           // N, total rollouts per step
  int horizon = 40;           // T
  double temperature = 0.1;   // lambda
  double learning_rate = 1.0; // alpha
  int cycles = 3;             // L (MPOPI)
  int elites = 0;             // K_e; 0 selects the per-controller default
  double cov_floor = kDefaultCovarianceFloor;
  double init_scale = 0.2;    // initial covariance is init_scale * I
  ShiftFill shift_fill = ShiftFill::RepeatLast;
  CovarianceMode covariance_mode = CovarianceMode::PerTimestep;
  bool covariance_mode_set = false;  // false: shared for MPPI, per-timestep otherwise
  bool reset_covariance = false;     // restore init_scale * I at every step
  InnerCenter inner_center = InnerCenter::OuterMean;

  void validate() const;  // throws ParameterError naming the field

  CovarianceMode effective_covariance_mode() const;
  // Rollouts in MPOPI cycle `cycle` (0-based); remainder goes to the last.
  int cycle_samples(int cycle) const;
  // Elite count actually used (CE: over N, MPOPI: over each cycle).
  int effective_elites() const;
  // Simulations per controller step; equal to `samples` for every type.
  int simulations_per_step() const;
};

struct CycleSummary {
  int samples = 0;
  double best_cost = 0.0;
  double mean_cost = 0.0;
  double exploration = 0.0;  // of the distribution the cycle sampled from
};

struct StepDiagnostics {
  double best_cost = 0.0;
  double mean_cost = 0.0;  // over finite-cost rollouts of the step
  double weight_entropy = 0.0;
  double exploration = 0.0;  // of the returned (shifted) policy
  std::vector<CycleSummary> cycles;
  int simulations = 0;
  int failed_rollouts = 0;
  double wall_ms = 0.0;
};

struct StepResult {
  Eigen::VectorXd action;
  Policy policy;  // updated and shifted
  Sequence mean;  // updated mean before shifting
  StepDiagnostics diagnostics;
};

Policy initial_policy(const ControllerConfig& cfg, int control_dim);

/// mu_new = mu + sum_n w_n offset_n.
Sequence path_integral_mean(const Sequence& mean, std::span<const Sequence> offsets, const WeightVector<double>& w);

/// Importance correction added to an MPOPI rollout cost:
/// sum_t lambda (1 - alpha) mu'_t^T Sigma_t^{-1} (noise_t + mu'_t - mu_t).
/// `covariances` are the step-initial (outer) ones; exactly 0 when alpha = 1.
double mpopi_importance_correction(const Sequence& noise, const Sequence& mean, const Sequence& cycle_mean,
                                   std::span<const Eigen::MatrixXd> covariances, double temperature,
                                   double learning_rate);

StepResult mppi_step(const Policy& policy, const Environment& env, const State& x0, const ControllerConfig& cfg,
                     const SeedSpec& seeds, WorkerPool& pool);
StepResult cma_step(const Policy& policy, const Environment& env, const State& x0, const ControllerConfig& cfg,
                    const SeedSpec& seeds, WorkerPool& pool);
StepResult ce_step(const Policy& policy, const Environment& env, const State& x0, const ControllerConfig& cfg,
                   const SeedSpec& seeds, WorkerPool& pool);
StepResult mpopi_step(const Policy& policy, const Environment& env, const State& x0, const ControllerConfig& cfg,
                      const SeedSpec& seeds, WorkerPool& pool);

StepResult controller_step(const Policy& policy, const Environment& env, const State& x0,
                           const ControllerConfig& cfg, const SeedSpec& seeds, WorkerPool& pool);

/// Receding-horizon controller: owns its policy, step counter and worker pool.
class Controller {
 public:
  Controller(ControllerConfig cfg, int control_dim, std::uint64_t seed, unsigned workers = 1);

  StepResult step(const Environment& env, const State& x);
  const Policy& policy() const { return policy_; }
  const ControllerConfig& config() const { return cfg_; }
  std::uint32_t steps_taken() const { return step_; }

 private:
  ControllerConfig cfg_;
  Policy policy_;
  std::uint64_t seed_;
  std::uint32_t step_ = 0;
  std::unique_ptr<WorkerPool> pool_;
};

}  // namespace mpopi
