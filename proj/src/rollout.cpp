#include "mpopi/rollout.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mpopi/errors.hpp"

namespace mpopi {

int RolloutBatch::failed_count() const {
  return static_cast<int>(std::count(failed.begin(), failed.end(), std::uint8_t{1}));
}

WorkerPool::WorkerPool(unsigned workers) : workers_(workers == 0 ? std::thread::hardware_concurrency() : workers) {
  if (workers_ == 0) workers_ = 1;
  for (unsigned id = 1; id < workers_; ++id) threads_.emplace_back([this, id] { run(id); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lock(mutex_);
    stop_ = true;
  }
  wake_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(unsigned id) {
  std::uint64_t seen = 0;
  for (;;) {
    const std::function<void(std::size_t)>* body = nullptr;
    std::size_t count = 0;
    {
      std::unique_lock lock(mutex_);
      wake_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      body = body_;
      count = count_;
    }
    for (std::size_t i = id; i < count; i += workers_) (*body)(i);
    {
      std::lock_guard lock(mutex_);
      if (--pending_ == 0) done_.notify_one();
    }
  }
}

void WorkerPool::parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  if (workers_ == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  {
    std::lock_guard lock(mutex_);
    body_ = &body;
    count_ = count;
    pending_ = workers_ - 1;
    ++generation_;
  }
  wake_.notify_all();
  for (std::size_t i = 0; i < count; i += workers_) body(i);
  std::unique_lock lock(mutex_);
  done_.wait(lock, [&] { return pending_ == 0; });
  body_ = nullptr;
}

RolloutBatch sample_noise_batch(const Policy& policy, int count, const SeedSpec& seeds, std::uint32_t cycle) {
  if (count < 1) throw ParameterError("sample_noise_batch: sample count must be at least 1");
  const Eigen::Index horizon = policy.horizon();
  const Eigen::Index dim = policy.control_dim();

  std::vector<Eigen::MatrixXd> factors;
  factors.reserve(policy.covariances().size());
  for (const auto& c : policy.covariances()) {
    Eigen::LLT<Eigen::MatrixXd> llt(c);
    if (llt.info() != Eigen::Success) throw InvariantError("sample_noise_batch: covariance is not positive definite");
    factors.push_back(llt.matrixL());
  }

  RolloutBatch batch;
  batch.noises.resize(static_cast<std::size_t>(count));
  batch.controls.resize(static_cast<std::size_t>(count));
  batch.costs = Eigen::VectorXd::Constant(count, std::numeric_limits<double>::quiet_NaN());
  batch.failed.assign(static_cast<std::size_t>(count), 0);
  Eigen::VectorXd z(dim);
  for (int n = 0; n < count; ++n) {
    NormalStream stream(seeds.stream(cycle, static_cast<std::uint32_t>(n)));
    Sequence noise(horizon, dim);
    for (Eigen::Index t = 0; t < horizon; ++t) {
      for (Eigen::Index j = 0; j < dim; ++j) z[j] = stream.next();
      const auto& factor = factors[policy.shared() ? 0 : static_cast<std::size_t>(t)];
      noise.row(t) = (factor * z).transpose();
    }
    batch.controls[static_cast<std::size_t>(n)] = policy.mean() + noise;
    batch.noises[static_cast<std::size_t>(n)] = std::move(noise);
  }
  return batch;
}

void clamp_batch(RolloutBatch& batch, const Sequence& mean, const Eigen::VectorXd& lower,
                 const Eigen::VectorXd& upper) {
  if (lower.size() != mean.cols() || upper.size() != mean.cols()) throw InputError("clamp_batch: bound size mismatch");
  const Eigen::RowVectorXd lo = lower.transpose(), hi = upper.transpose();
  for (std::size_t n = 0; n < batch.size(); ++n) {
    Sequence& u = batch.controls[n];
    for (Eigen::Index t = 0; t < u.rows(); ++t) u.row(t) = u.row(t).cwiseMax(lo).cwiseMin(hi);
    batch.noises[n] = u - mean;
  }
}

double rollout_cost(const Environment& env, const State& x0, const Sequence& controls, bool* failed) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (failed) *failed = false;
  State x = x0;
  double total = 0.0;
  for (Eigen::Index t = 0; t < controls.rows(); ++t) {
    const Control u = controls.row(t).transpose();
    total += env.stage_cost(x, u);
    Transition next = env.transition(x, u);
    if (!next.valid) {
      if (failed) *failed = true;
      return kInf;
    }
    x = std::move(next.state);
  }
  total += env.terminal_cost(x);
  if (!std::isfinite(total)) {
    if (failed) *failed = true;
    return kInf;
  }
  return total;
}

void evaluate_batch(const Environment& env, const State& x0, RolloutBatch& batch, WorkerPool& pool) {
  const std::size_t count = batch.controls.size();
  batch.costs.resize(static_cast<Eigen::Index>(count));
  batch.failed.assign(count, 0);
  pool.parallel_for(count, [&](std::size_t n) {
    bool failed = false;
    batch.costs[static_cast<Eigen::Index>(n)] = rollout_cost(env, x0, batch.controls[n], &failed);
    batch.failed[n] = failed ? 1 : 0;
  });
  if (count > 0 && batch.failed_count() == static_cast<int>(count)) {
    throw StepFailure("evaluate_batch: every rollout failed");
  }
}

std::vector<int> sort_and_select_elites(std::span<const double> costs, std::span<const int> sample_index,
                                        int elites) {
  if (costs.size() != sample_index.size()) throw InputError("sort_and_select_elites: index/cost size mismatch");
  if (elites < 1 || static_cast<std::size_t>(elites) > costs.size()) {
    throw ParameterError("sort_and_select_elites: elite count must lie in [1, N]");
  }
  std::vector<std::size_t> order(costs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (costs[a] != costs[b]) return costs[a] < costs[b];
    return sample_index[a] < sample_index[b];
  });
  std::vector<int> out(static_cast<std::size_t>(elites));
  for (int k = 0; k < elites; ++k) out[static_cast<std::size_t>(k)] = sample_index[order[static_cast<std::size_t>(k)]];
  return out;
}

std::vector<int> sort_and_select_elites(const RolloutBatch& batch, int elites) {
  for (Eigen::Index i = 0; i < batch.costs.size(); ++i) {
    if (std::isnan(batch.costs[i])) throw InputError("sort_and_select_elites: batch has unevaluated costs");
  }
  std::vector<int> index(static_cast<std::size_t>(batch.costs.size()));
  std::iota(index.begin(), index.end(), 0);
  return sort_and_select_elites(std::span<const double>(batch.costs.data(), index.size()), index, elites);
}

}  // namespace mpopi
