#pragma once

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <string>

#include "mpopi/errors.hpp"

namespace mpopi {

enum class WeightScheme { Softmax, LogRank, EliteUniform };

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Normalized, entrywise nonnegative sample weights. Entries are aligned either
// with sample index (softmax) or with cost-ascending rank (log-rank, elite).
template <typename Scalar>
struct WeightVector {
  Vector<Scalar> values;
  WeightScheme scheme = WeightScheme::Softmax;

  Eigen::Index size() const { return values.size(); }
  Scalar operator[](Eigen::Index i) const { return values[i]; }
  Scalar sum() const { return values.sum(); }
};

// Constant added to the log-rank normalizer.
inline constexpr double kLogRankEpsilon = 1e-10;

/// Exponentially weighted path-integral weights,
/// w_n = exp(-(c_n - c_min) / lambda) / sum_k exp(-(c_k - c_min) / lambda).
///
/// A cost of +infinity marks a failed rollout and receives weight 0. NaN or
/// -infinity is rejected, as is a batch with no finite cost.
template <typename Scalar>
WeightVector<Scalar> softmax_weights(const Eigen::Ref<const Vector<Scalar>>& costs, Scalar lambda) {
  if (!(lambda > Scalar(0)) || !std::isfinite(lambda)) {
    throw ParameterError("softmax_weights: lambda must be positive and finite");
  }
  if (costs.size() == 0) throw InputError("softmax_weights: empty cost vector");
  Scalar min_cost = std::numeric_limits<Scalar>::infinity();
  for (Eigen::Index i = 0; i < costs.size(); ++i) {
    const Scalar c = costs[i];
    if (std::isnan(c) || c == -std::numeric_limits<Scalar>::infinity()) {
      throw InputError("softmax_weights: cost " + std::to_string(i) + " is not a number");
    }
    if (c < min_cost) min_cost = c;
  }
  if (!std::isfinite(min_cost)) throw InputError("softmax_weights: no finite cost in batch");

  WeightVector<Scalar> w{Vector<Scalar>(costs.size()), WeightScheme::Softmax};
  Scalar total = 0;
  for (Eigen::Index i = 0; i < costs.size(); ++i) {
    w.values[i] = std::isfinite(costs[i]) ? std::exp(-(costs[i] - min_cost) / lambda) : Scalar(0);
    total += w.values[i];
  }
  w.values /= total;
  return w;
}

/// Logarithmic rank weights w_i = log((K+1)/i) / (sum_j w_j + 1e-10), i = 1..K.
/// Index 0 belongs to the lowest-cost sample.
template <typename Scalar = double>
WeightVector<Scalar> log_rank_weights(Eigen::Index count) {
  if (count < 1) throw ParameterError("log_rank_weights: count must be at least 1");
  WeightVector<Scalar> w{Vector<Scalar>(count), WeightScheme::LogRank};
  const Scalar top = static_cast<Scalar>(count + 1);
  for (Eigen::Index i = 0; i < count; ++i) {
    w.values[i] = std::log(top / static_cast<Scalar>(i + 1));
  }
  w.values /= (w.values.sum() + static_cast<Scalar>(kLogRankEpsilon));
  return w;
}

/// 1/K_e on the K_e best (rank-ordered) samples, zero on the rest.
template <typename Scalar = double>
WeightVector<Scalar> elite_uniform_weights(Eigen::Index count, Eigen::Index elites) {
  if (elites < 1 || elites > count) {
    throw ParameterError("elite_uniform_weights: elite count must lie in [1, N]");
  }
  WeightVector<Scalar> w{Vector<Scalar>::Zero(count), WeightScheme::EliteUniform};
  w.values.head(elites).setConstant(Scalar(1) / static_cast<Scalar>(elites));
  return w;
}

// Shannon entropy of a weight vector (nats); 0 for a one-hot vector.
template <typename Scalar>
Scalar weight_entropy(const WeightVector<Scalar>& w) {
  Scalar h = 0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w[i] > Scalar(0)) h -= w[i] * std::log(w[i]);
  }
  return h;
}

}  // namespace mpopi
