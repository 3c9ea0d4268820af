#include "mpopi/controllers.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mpopi/errors.hpp"

namespace mpopi {

std::string to_string(ControllerType type) {
  switch (type) {
    case ControllerType::Mppi: return "mppi";
    case ControllerType::Cma: return "cma";
    case ControllerType::Ce: return "ce";
    case ControllerType::Mpopi: return "mpopi";
  }
  return "unknown";
}

ControllerType controller_type_from_string(const std::string& name) {
  if (name == "mppi") return ControllerType::Mppi;
  if (name == "cma") return ControllerType::Cma;
  if (name == "ce") return ControllerType::Ce;
  if (name == "mpopi") return ControllerType::Mpopi;
  throw ParameterError("unknown controller type '" + name + "'");
}

void ControllerConfig::validate() const {
  if (samples < 1) throw ParameterError("samples: must be at least 1", "samples");
  if (horizon < 1) throw ParameterError("horizon: must be at least 1", "horizon");
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ParameterError("lambda: must be positive", "lambda");
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) throw ParameterError("alpha: must lie in (0, 1]", "alpha");
  if (cycles < 1) throw ParameterError("cycles: must be at least 1", "cycles");
  if (!(cov_floor > 0.0) || !std::isfinite(cov_floor)) throw ParameterError("cov_floor: must be positive", "cov_floor");
  if (!(init_scale > 0.0) || !std::isfinite(init_scale)) throw ParameterError("init_scale: must be positive", "init_scale");
  if (elites < 0) throw ParameterError("elites: must be nonnegative (0 selects the default)", "elites");
  if (type == ControllerType::Mpopi) {
    if (samples < cycles) throw ParameterError("cycles: samples must be at least the number of cycles", "cycles");
    if (elites > cycle_samples(0)) throw ParameterError("elites: exceeds the per-cycle sample count", "elites");
  }
  if (type == ControllerType::Ce && elites > samples) throw ParameterError("elites: exceeds the sample count", "elites");
}

CovarianceMode ControllerConfig::effective_covariance_mode() const {
  if (covariance_mode_set) return covariance_mode;
  return type == ControllerType::Mppi ? CovarianceMode::Shared : CovarianceMode::PerTimestep;
}

int ControllerConfig::cycle_samples(int cycle) const {
  const int base = samples / cycles;
  return cycle == cycles - 1 ? samples - base * (cycles - 1) : base;
}

int ControllerConfig::effective_elites() const {
  switch (type) {
    case ControllerType::Ce:
      return elites > 0 ? elites : std::clamp((samples + 4) / 5, 1, samples);
    case ControllerType::Mpopi: {
      const int per_cycle = cycle_samples(0);
      return elites > 0 ? elites : std::min(per_cycle, std::max(2, (per_cycle + 2) / 3));
    }
    default:
      return samples;
  }
}

int ControllerConfig::simulations_per_step() const {
  if (type != ControllerType::Mpopi) return samples;
  int total = 0;
  for (int l = 0; l < cycles; ++l) total += cycle_samples(l);
  return total;
}

Policy initial_policy(const ControllerConfig& cfg, int control_dim) {
  return Policy::isotropic(cfg.horizon, control_dim, cfg.init_scale, cfg.effective_covariance_mode());
}

Sequence path_integral_mean(const Sequence& mean, std::span<const Sequence> offsets, const WeightVector<double>& w) {
  if (static_cast<Eigen::Index>(offsets.size()) != w.size()) {
    throw InputError("path_integral_mean: weight count does not match sample count");
  }
  Sequence acc = Sequence::Zero(mean.rows(), mean.cols());
  for (std::size_t n = 0; n < offsets.size(); ++n) {
    const double wn = w[static_cast<Eigen::Index>(n)];
    if (wn != 0.0) acc += wn * offsets[n];
  }
  return mean + acc;
}

namespace {

using Clock = std::chrono::steady_clock;

std::vector<Eigen::LLT<Eigen::MatrixXd>> factorize(std::span<const Eigen::MatrixXd> covariances) {
  std::vector<Eigen::LLT<Eigen::MatrixXd>> out;
  out.reserve(covariances.size());
  for (const auto& c : covariances) {
    out.emplace_back(c);
    if (out.back().info() != Eigen::Success) throw InvariantError("covariance is not positive definite");
  }
  return out;
}

double correction_with(const Sequence& noise, const Sequence& mean, const Sequence& cycle_mean,
                       const std::vector<Eigen::LLT<Eigen::MatrixXd>>& factors, double temperature,
                       double learning_rate) {
  if (learning_rate == 1.0) return 0.0;
  const double scale = temperature * (1.0 - learning_rate);
  double total = 0.0;
  for (Eigen::Index t = 0; t < noise.rows(); ++t) {
    const auto& llt = factors[factors.size() == 1 ? 0 : static_cast<std::size_t>(t)];
    const Eigen::VectorXd shifted = (noise.row(t) + cycle_mean.row(t) - mean.row(t)).transpose();
    total += cycle_mean.row(t).dot(llt.solve(shifted));
  }
  return scale * total;
}

Policy prepared(const Policy& policy, const ControllerConfig& cfg) {
  if (cfg.type == ControllerType::Mppi || !cfg.reset_covariance) return policy;
  const std::size_t count = cfg.effective_covariance_mode() == CovarianceMode::Shared
                                ? 1
                                : static_cast<std::size_t>(policy.horizon());
  const Eigen::Index m = policy.control_dim();
  return policy.with_covariances(
      std::vector<Eigen::MatrixXd>(count, cfg.init_scale * Eigen::MatrixXd::Identity(m, m)));
}

void check_shapes(const Policy& policy, const Environment& env, const ControllerConfig& cfg) {
  cfg.validate();
  if (policy.control_dim() != env.control_dim()) throw InputError("policy control dimension does not match env");
  if (policy.horizon() != cfg.horizon) throw InputError("policy horizon does not match config");
}

CycleSummary summarize(const Eigen::VectorXd& costs, double exploration) {
  CycleSummary s;
  s.samples = static_cast<int>(costs.size());
  s.best_cost = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  int finite = 0;
  for (Eigen::Index i = 0; i < costs.size(); ++i) {
    if (!std::isfinite(costs[i])) continue;
    s.best_cost = std::min(s.best_cost, costs[i]);
    sum += costs[i];
    ++finite;
  }
  s.mean_cost = finite > 0 ? sum / finite : std::numeric_limits<double>::infinity();
  s.exploration = exploration;
  return s;
}

void fill_totals(StepDiagnostics& d) {
  d.best_cost = std::numeric_limits<double>::infinity();
  double weighted = 0.0;
  int samples = 0;
  for (const auto& c : d.cycles) {
    d.best_cost = std::min(d.best_cost, c.best_cost);
    weighted += c.mean_cost * c.samples;
    samples += c.samples;
  }
  d.mean_cost = samples > 0 ? weighted / samples : 0.0;
  d.simulations = samples;
}

std::vector<Sequence> gather(const std::vector<Sequence>& controls, const std::vector<int>& order) {
  std::vector<Sequence> out;
  out.reserve(order.size());
  for (int i : order) out.push_back(controls[static_cast<std::size_t>(i)]);
  return out;
}

WeightVector<double> softmax_or_fail(const Eigen::VectorXd& costs, double temperature) {
  try {
    return softmax_weights<double>(costs, temperature);
  } catch (const InputError& e) {
    throw StepFailure(std::string("no usable rollout: ") + e.what());
  }
}

// Projects a mean onto the control box. Without it the mean can drift past a
// bound where every sample clamps to the same control and no update moves it.
void clamp_to_bounds(Sequence& mean, const Environment& env) {
  const Eigen::RowVectorXd lo = env.control_lower().transpose();
  const Eigen::RowVectorXd hi = env.control_upper().transpose();
  for (Eigen::Index t = 0; t < mean.rows(); ++t) mean.row(t) = mean.row(t).cwiseMax(lo).cwiseMin(hi);
}

StepResult finish(Sequence mean, std::vector<Eigen::MatrixXd> covariances, const Environment& env,
                  const ControllerConfig& cfg, StepDiagnostics diag, Clock::time_point start) {
  clamp_to_bounds(mean, env);
  StepResult r;
  r.action = mean.row(0).transpose();
  r.policy = shift_policy(Policy(mean, std::move(covariances)), cfg.shift_fill);
  r.mean = std::move(mean);
  diag.exploration = exploration_magnitude(r.policy);
  fill_totals(diag);
  diag.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  r.diagnostics = std::move(diag);
  return r;
}

}  // namespace

double mpopi_importance_correction(const Sequence& noise, const Sequence& mean, const Sequence& cycle_mean,
                                   std::span<const Eigen::MatrixXd> covariances, double temperature,
                                   double learning_rate) {
  if (noise.rows() != mean.rows() || noise.cols() != mean.cols() || cycle_mean.rows() != mean.rows() ||
      cycle_mean.cols() != mean.cols()) {
    throw InputError("mpopi_importance_correction: shape mismatch");
  }
  if (covariances.size() != 1 && covariances.size() != static_cast<std::size_t>(mean.rows())) {
    throw InputError("mpopi_importance_correction: covariance count does not match horizon");
  }
  return correction_with(noise, mean, cycle_mean, factorize(covariances), temperature, learning_rate);
}

StepResult mppi_step(const Policy& policy, const Environment& env, const State& x0, const ControllerConfig& cfg,
                     const SeedSpec& seeds, WorkerPool& pool) {
  const auto start = Clock::now();
  check_shapes(policy, env, cfg);
  StepDiagnostics diag;
  RolloutBatch batch = sample_noise_batch(policy, cfg.samples, seeds, 0);
  clamp_batch(batch, policy.mean(), env.control_lower(), env.control_upper());
  evaluate_batch(env, x0, batch, pool);
  diag.failed_rollouts = batch.failed_count();
  diag.cycles.push_back(summarize(batch.costs, exploration_magnitude(policy)));

  const WeightVector<double> w = softmax_or_fail(batch.costs, cfg.temperature);
  diag.weight_entropy = weight_entropy(w);
  Sequence mean = path_integral_mean(policy.mean(), batch.noises, w);
  return finish(std::move(mean), policy.covariances(), env, cfg, std::move(diag), start);
}

StepResult cma_step(const Policy& input, const Environment& env, const State& x0, const ControllerConfig& cfg,
                    const SeedSpec& seeds, WorkerPool& pool) {
  const auto start = Clock::now();
  check_shapes(input, env, cfg);
  const Policy policy = prepared(input, cfg);
  StepDiagnostics diag;
  RolloutBatch batch = sample_noise_batch(policy, cfg.samples, seeds, 0);
  clamp_batch(batch, policy.mean(), env.control_lower(), env.control_upper());
  evaluate_batch(env, x0, batch, pool);
  diag.failed_rollouts = batch.failed_count();
  diag.cycles.push_back(summarize(batch.costs, exploration_magnitude(policy)));

  const std::vector<int> order = sort_and_select_elites(batch, cfg.samples);
  const std::vector<Sequence> ranked = gather(batch.controls, order);
  const WeightVector<double> w = log_rank_weights<double>(cfg.samples);
  diag.weight_entropy = weight_entropy(w);
  // Covariance first: it is centred on the mean the samples were drawn from.
  auto covs = weighted_cov_update<double>(policy.covariances(), policy.mean(), ranked, w, cfg.learning_rate,
                                          cfg.cov_floor);
  Sequence mean = weighted_mean_update<double>(policy.mean(), ranked, w, cfg.learning_rate);
  return finish(std::move(mean), std::move(covs), env, cfg, std::move(diag), start);
}

StepResult ce_step(const Policy& input, const Environment& env, const State& x0, const ControllerConfig& cfg,
                   const SeedSpec& seeds, WorkerPool& pool) {
  const auto start = Clock::now();
  check_shapes(input, env, cfg);
  const Policy policy = prepared(input, cfg);
  StepDiagnostics diag;
  RolloutBatch batch = sample_noise_batch(policy, cfg.samples, seeds, 0);
  clamp_batch(batch, policy.mean(), env.control_lower(), env.control_upper());
  evaluate_batch(env, x0, batch, pool);
  diag.failed_rollouts = batch.failed_count();
  diag.cycles.push_back(summarize(batch.costs, exploration_magnitude(policy)));

  const int elites = cfg.effective_elites();
  const std::vector<int> order = sort_and_select_elites(batch, elites);
  const std::vector<Sequence> elite = gather(batch.controls, order);
  const WeightVector<double> w = elite_uniform_weights<double>(elites, elites);
  diag.weight_entropy = weight_entropy(w);
  // CE refits around the new elite mean.
  Sequence mean = weighted_mean_update<double>(policy.mean(), elite, w, 1.0);
  auto covs = weighted_cov_update<double>(policy.covariances(), mean, elite, w, 1.0, cfg.cov_floor);
  return finish(std::move(mean), std::move(covs), env, cfg, std::move(diag), start);
}

StepResult mpopi_step(const Policy& input, const Environment& env, const State& x0, const ControllerConfig& cfg,
                      const SeedSpec& seeds, WorkerPool& pool) {
  const auto start = Clock::now();
  check_shapes(input, env, cfg);
  const Policy policy = prepared(input, cfg);
  const Sequence& mean = policy.mean();
  const auto outer_factors = factorize(policy.covariances());
  const int elites = cfg.effective_elites();

  StepDiagnostics diag;
  Policy cycle_policy = policy;  // (mu', Sigma')
  RolloutBatch batch;
  for (int l = 0; l < cfg.cycles; ++l) {
    batch = sample_noise_batch(cycle_policy, cfg.cycle_samples(l), seeds, static_cast<std::uint32_t>(l));
    clamp_batch(batch, cycle_policy.mean(), env.control_lower(), env.control_upper());
    evaluate_batch(env, x0, batch, pool);
    diag.failed_rollouts += batch.failed_count();
    for (std::size_t n = 0; n < batch.size(); ++n) {
      batch.costs[static_cast<Eigen::Index>(n)] += correction_with(
          batch.noises[n], mean, cycle_policy.mean(), outer_factors, cfg.temperature, cfg.learning_rate);
    }
    diag.cycles.push_back(summarize(batch.costs, exploration_magnitude(cycle_policy)));
    if (l + 1 == cfg.cycles) break;

    const std::vector<int> order = sort_and_select_elites(batch, elites);
    const std::vector<Sequence> elite = gather(batch.controls, order);
    const WeightVector<double> w = log_rank_weights<double>(elites);
    const Sequence& center = cfg.inner_center == InnerCenter::OuterMean ? mean : cycle_policy.mean();
    auto covs = weighted_cov_update<double>(cycle_policy.covariances(), center, elite, w, cfg.learning_rate,
                                            cfg.cov_floor);
    Sequence next_mean = weighted_mean_update<double>(cycle_policy.mean(), elite, w, cfg.learning_rate);
    clamp_to_bounds(next_mean, env);
    cycle_policy = Policy(std::move(next_mean), std::move(covs));
  }

  const WeightVector<double> w = softmax_or_fail(batch.costs, cfg.temperature);
  diag.weight_entropy = weight_entropy(w);
  const Sequence drift = cycle_policy.mean() - mean;
  std::vector<Sequence> offsets;
  offsets.reserve(batch.size());
  for (const auto& noise : batch.noises) offsets.push_back(noise + drift);
  Sequence updated = path_integral_mean(mean, offsets, w);
  return finish(std::move(updated), cycle_policy.covariances(), env, cfg, std::move(diag), start);
}

StepResult controller_step(const Policy& policy, const Environment& env, const State& x0,
                           const ControllerConfig& cfg, const SeedSpec& seeds, WorkerPool& pool) {
  switch (cfg.type) {
    case ControllerType::Mppi: return mppi_step(policy, env, x0, cfg, seeds, pool);
    case ControllerType::Cma: return cma_step(policy, env, x0, cfg, seeds, pool);
    case ControllerType::Ce: return ce_step(policy, env, x0, cfg, seeds, pool);
    case ControllerType::Mpopi: return mpopi_step(policy, env, x0, cfg, seeds, pool);
  }
  throw ParameterError("unknown controller type");
}

Controller::Controller(ControllerConfig cfg, int control_dim, std::uint64_t seed, unsigned workers)
    : cfg_(std::move(cfg)),
      policy_((cfg_.validate(), initial_policy(cfg_, control_dim))),
      seed_(seed),
      pool_(std::make_unique<WorkerPool>(workers)) {}

StepResult Controller::step(const Environment& env, const State& x) {
  StepResult r = controller_step(policy_, env, x, cfg_, SeedSpec{seed_, step_}, *pool_);
  policy_ = r.policy;
  ++step_;
  return r;
}

}  // namespace mpopi
