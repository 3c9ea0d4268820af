#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mpopi/errors.hpp"
#include "mpopi/weights.hpp"

namespace mpopi {

// Row t holds the control applied at horizon step t (shape T x m).
template <typename Scalar>
using ControlSequence = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class CovarianceMode { Shared, PerTimestep };
enum class ShiftFill { RepeatLast, Zero };

inline constexpr double kDefaultCovarianceFloor = 1e-6;

/// Gaussian distribution over control sequences: a T x m mean and either one
/// m x m covariance per horizon step or a single covariance shared by all
/// steps.
template <typename Scalar>
class GaussianPolicy {
 public:
  GaussianPolicy() = default;

  GaussianPolicy(ControlSequence<Scalar> mean, std::vector<Matrix<Scalar>> covariances)
      : mean_(std::move(mean)), covariances_(std::move(covariances)) {
    if (mean_.rows() < 1 || mean_.cols() < 1) throw InputError("GaussianPolicy: empty mean");
    if (!mean_.allFinite()) throw InputError("GaussianPolicy: non-finite mean");
    if (covariances_.size() != 1 && covariances_.size() != static_cast<std::size_t>(mean_.rows())) {
      throw InputError("GaussianPolicy: need one shared covariance or one per timestep");
    }
    for (const auto& c : covariances_) {
      if (c.rows() != mean_.cols() || c.cols() != mean_.cols()) {
        throw InputError("GaussianPolicy: covariance shape does not match control dimension");
      }
    }
  }

  // Zero (or given) mean with every covariance equal to variance * I.
  static GaussianPolicy isotropic(Eigen::Index horizon, Eigen::Index dim, Scalar variance,
                                  CovarianceMode mode = CovarianceMode::PerTimestep) {
    const std::size_t count = mode == CovarianceMode::Shared ? 1 : static_cast<std::size_t>(horizon);
    return GaussianPolicy(ControlSequence<Scalar>::Zero(horizon, dim),
                          std::vector<Matrix<Scalar>>(count, variance * Matrix<Scalar>::Identity(dim, dim)));
  }

  Eigen::Index horizon() const { return mean_.rows(); }
  Eigen::Index control_dim() const { return mean_.cols(); }
  bool shared() const { return covariances_.size() == 1; }
  CovarianceMode mode() const { return shared() ? CovarianceMode::Shared : CovarianceMode::PerTimestep; }

  const ControlSequence<Scalar>& mean() const { return mean_; }
  const std::vector<Matrix<Scalar>>& covariances() const { return covariances_; }
  const Matrix<Scalar>& covariance(Eigen::Index t) const {
    return covariances_[shared() ? 0 : static_cast<std::size_t>(t)];
  }

  GaussianPolicy with_mean(ControlSequence<Scalar> mean) const {
    return GaussianPolicy(std::move(mean), covariances_);
  }
  GaussianPolicy with_covariances(std::vector<Matrix<Scalar>> covariances) const {
    return GaussianPolicy(mean_, std::move(covariances));
  }

 private:
  ControlSequence<Scalar> mean_;
  std::vector<Matrix<Scalar>> covariances_;
};

namespace detail {

template <typename Scalar>
void check_samples(const ControlSequence<Scalar>& reference, std::span<const ControlSequence<Scalar>> samples,
                   const WeightVector<Scalar>& w, const char* op) {
  if (static_cast<Eigen::Index>(samples.size()) != w.size()) {
    throw InputError(std::string(op) + ": weight count does not match sample count");
  }
  for (const auto& s : samples) {
    if (s.rows() != reference.rows() || s.cols() != reference.cols()) {
      throw InputError(std::string(op) + ": sample shape does not match mean");
    }
  }
}

template <typename Scalar>
void check_rate(Scalar alpha, const char* op) {
  if (!(alpha > Scalar(0) && alpha <= Scalar(1))) {
    throw ParameterError(std::string(op) + ": learning rate must lie in (0, 1]");
  }
}

}  // namespace detail

/// Projects a (nearly) symmetric matrix onto the SPD cone with eigenvalues at
/// least `floor`. A matrix already satisfying the bound comes back exactly
/// symmetrized, so the map is idempotent.
template <typename Scalar>
Matrix<Scalar> bound_covariance(const Eigen::Ref<const Matrix<Scalar>>& sigma, Scalar floor) {
  if (sigma.rows() != sigma.cols()) throw InputError("bound_covariance: matrix is not square");
  if (!sigma.allFinite()) throw InputError("bound_covariance: non-finite entry");
  if (!(floor > Scalar(0))) throw ParameterError("bound_covariance: floor must be positive");
  Matrix<Scalar> sym = (sigma + sigma.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sym);
  if (eig.info() != Eigen::Success) throw InvariantError("bound_covariance: eigendecomposition failed");
  // Reconstruction rounds at the scale of the largest eigenvalue; clamp slightly
  // above the floor so the result keeps it.
  const Scalar slack = Scalar(16) * std::numeric_limits<Scalar>::epsilon() * eig.eigenvalues().cwiseAbs().maxCoeff();
  if (eig.eigenvalues().minCoeff() >= floor + slack) return sym;
  const Vector<Scalar> clamped = eig.eigenvalues().cwiseMax(floor + slack);
  Matrix<Scalar> out = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  return (out + out.transpose()) / Scalar(2);
}

/// mu' = (1 - alpha * sum w) mu + alpha * sum_k w_k u_k, elementwise.
template <typename Scalar>
ControlSequence<Scalar> weighted_mean_update(const ControlSequence<Scalar>& mean,
                                             std::span<const ControlSequence<Scalar>> samples,
                                             const WeightVector<Scalar>& w, Scalar alpha) {
  detail::check_samples(mean, samples, w, "weighted_mean_update");
  detail::check_rate(alpha, "weighted_mean_update");
  ControlSequence<Scalar> acc = ControlSequence<Scalar>::Zero(mean.rows(), mean.cols());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (w[static_cast<Eigen::Index>(k)] != Scalar(0)) acc += w[static_cast<Eigen::Index>(k)] * samples[k];
  }
  return (Scalar(1) - alpha * w.sum()) * mean + alpha * acc;
}

/// Sigma'_t = (1 - alpha * sum w) Sigma_t + alpha * sum_k w_k d_k d_k^T with
/// d_k = u_{k,t} - center_t, followed by eigenvalue flooring. `center` must be
/// the mean the samples were drawn around *before* any mean update.
///
/// With a single shared covariance the scatter is averaged over timesteps.
template <typename Scalar>
std::vector<Matrix<Scalar>> weighted_cov_update(std::span<const Matrix<Scalar>> covariances,
                                                const ControlSequence<Scalar>& center,
                                                std::span<const ControlSequence<Scalar>> samples,
                                                const WeightVector<Scalar>& w, Scalar alpha, Scalar floor) {
  detail::check_samples(center, samples, w, "weighted_cov_update");
  detail::check_rate(alpha, "weighted_cov_update");
  const Eigen::Index horizon = center.rows();
  const Eigen::Index dim = center.cols();
  const bool shared = covariances.size() == 1;
  if (!shared && covariances.size() != static_cast<std::size_t>(horizon)) {
    throw InputError("weighted_cov_update: covariance count does not match horizon");
  }
  for (const auto& c : covariances) {
    if (c.rows() != dim || c.cols() != dim) throw InputError("weighted_cov_update: covariance shape mismatch");
  }

  const Scalar keep = Scalar(1) - alpha * w.sum();
  std::vector<Matrix<Scalar>> out(covariances.size(), Matrix<Scalar>::Zero(dim, dim));
  for (Eigen::Index t = 0; t < horizon; ++t) {
    Matrix<Scalar> scatter = Matrix<Scalar>::Zero(dim, dim);
    for (std::size_t k = 0; k < samples.size(); ++k) {
      const Scalar wk = w[static_cast<Eigen::Index>(k)];
      if (wk == Scalar(0)) continue;
      const Vector<Scalar> d = (samples[k].row(t) - center.row(t)).transpose();
      scatter.noalias() += wk * d * d.transpose();
    }
    if (shared) {
      out[0] += scatter / static_cast<Scalar>(horizon);
    } else {
      out[static_cast<std::size_t>(t)] = keep * covariances[static_cast<std::size_t>(t)] + alpha * scatter;
    }
  }
  if (shared) out[0] = keep * covariances[0] + alpha * out[0];
  for (auto& c : out) c = bound_covariance<Scalar>(c, floor);
  return out;
}

/// Receding-horizon shift: row t takes row t+1. The vacated last mean row is
/// repeated or zeroed per `fill`; covariances always repeat their last entry.
template <typename Scalar>
GaussianPolicy<Scalar> shift_policy(const GaussianPolicy<Scalar>& policy, ShiftFill fill = ShiftFill::RepeatLast) {
  const Eigen::Index horizon = policy.horizon();
  ControlSequence<Scalar> mean = policy.mean();
  if (horizon > 1) {
    mean.topRows(horizon - 1) = policy.mean().bottomRows(horizon - 1).eval();
  }
  if (fill == ShiftFill::Zero) mean.row(horizon - 1).setZero();

  std::vector<Matrix<Scalar>> covs = policy.covariances();
  if (!policy.shared()) {
    std::rotate(covs.begin(), covs.begin() + 1, covs.end());
    covs.back() = covs[covs.size() >= 2 ? covs.size() - 2 : 0];
  }
  return GaussianPolicy<Scalar>(std::move(mean), std::move(covs));
}

template <typename Scalar>
Scalar largest_eigenvalue(const Eigen::Ref<const Matrix<Scalar>>& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> eig(sigma, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

/// Largest covariance eigenvalue over the horizon.
template <typename Scalar>
Scalar exploration_magnitude(const GaussianPolicy<Scalar>& policy) {
  Scalar best = 0;
  for (const auto& c : policy.covariances()) best = std::max(best, largest_eigenvalue<Scalar>(c));
  return best;
}

}  // namespace mpopi
