#pragma once

#include <Eigen/Core>

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "mpopi/env.hpp"
#include "mpopi/policy.hpp"
#include "mpopi/random.hpp"

namespace mpopi {

using Sequence = ControlSequence<double>;
using Policy = GaussianPolicy<double>;

// N candidate control sequences for one sampling round. Position in every
// vector is the sample index.
struct RolloutBatch {
  std::vector<Sequence> noises;    // zero-mean perturbations
  std::vector<Sequence> controls;  // sampling mean + noise
  Eigen::VectorXd costs;           // NaN until evaluated
  std::vector<std::uint8_t> failed;

  std::size_t size() const { return controls.size(); }
  int failed_count() const;
};

/// Persistent pool executing index-parallel loops. Each index is processed by
/// exactly one worker and writes only to its own slot, so results do not
/// depend on the worker count.
class WorkerPool {
 public:
  // 0 selects the number of logical cores.
  explicit WorkerPool(unsigned workers = 1);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const { return workers_; }
  void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

 private:
  void run(unsigned id);

  unsigned workers_;
  std::vector<std::thread> threads_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  const std::function<void(std::size_t)>* body_ = nullptr;
  std::size_t count_ = 0;
  std::uint64_t generation_ = 0;
  unsigned pending_ = 0;
  bool stop_ = false;
};

/// Draws N perturbations from N(0, Sigma_t) per timestep through the Cholesky
/// factor of each Sigma_t; sample n uses stream (seed, step, cycle, n).
RolloutBatch sample_noise_batch(const Policy& policy, int count, const SeedSpec& seeds, std::uint32_t cycle = 0);

/// Clamps every sampled control to [lower, upper] and rewrites each noise as
/// the clamped control minus `mean`, so updates only see controls that were
/// actually applied.
void clamp_batch(RolloutBatch& batch, const Sequence& mean, const Eigen::VectorXd& lower,
                 const Eigen::VectorXd& upper);

/// Sequential cost of one control sequence: stage costs summed in timestep
/// order plus the terminal cost. Returns +infinity if the state becomes
/// invalid or the cost is not finite.
double rollout_cost(const Environment& env, const State& x0, const Sequence& controls, bool* failed = nullptr);

/// Fills `batch.costs` and `batch.failed`. Throws StepFailure when every
/// rollout failed.
void evaluate_batch(const Environment& env, const State& x0, RolloutBatch& batch, WorkerPool& pool);

/// Sample indices of the `elites` lowest costs in ascending cost order; ties
/// go to the lower sample index.
std::vector<int> sort_and_select_elites(std::span<const double> costs, std::span<const int> sample_index,
                                        int elites);
std::vector<int> sort_and_select_elites(const RolloutBatch& batch, int elites);

}  // namespace mpopi
