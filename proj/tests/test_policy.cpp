#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "mpopi/errors.hpp"
#include "mpopi/policy.hpp"

namespace {

using Seq = mpopi::ControlSequence<double>;
using Mat = mpopi::Matrix<double>;

Eigen::MatrixXd random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = g(rng);
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(n, n);
}

// Largest eigenvalue by power iteration; independent of the library's solver.
double power_iteration(const Eigen::MatrixXd& a) {
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(a.rows(), 1.0, 2.0).normalized();
  double value = 0;
  for (int it = 0; it < 20000; ++it) {
    const Eigen::VectorXd next = a * v;
    const double next_value = v.dot(next);
    v = next.normalized();
    if (std::abs(next_value - value) < 1e-15 * std::abs(next_value)) break;
    value = next_value;
  }
  return v.dot(a * v);
}

Seq scalar(double v) { return Seq::Constant(1, 1, v); }

TEST(BoundCovariance, FloorsSmallEigenvalues) {
  const Eigen::Matrix2d in = Eigen::Vector2d(1e-12, 1.0).asDiagonal();
  const Mat out = mpopi::bound_covariance<double>(in, 1e-6);
  // Floored eigenvalues sit 16 ulp of the largest eigenvalue above the floor.
  const double floored = 1e-6 + 16 * std::numeric_limits<double>::epsilon();
  EXPECT_NEAR((out - Eigen::Matrix2d(Eigen::Vector2d(floored, 1.0).asDiagonal())).norm(), 0.0, 1e-15);
  EXPECT_NEAR((out - Eigen::Matrix2d(Eigen::Vector2d(1e-6, 1.0).asDiagonal())).norm(), 0.0, 1e-14);
}

TEST(BoundCovariance, IdentityUnchanged) {
  const Mat out = mpopi::bound_covariance<double>(Eigen::Matrix3d::Identity(), 1e-6);
  EXPECT_EQ(out, Mat(Eigen::Matrix3d::Identity()));
}

TEST(BoundCovariance, Idempotent) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::MatrixXd a = random_spd(rng, 3) - 1.5 * Eigen::MatrixXd::Identity(3, 3);
    a = (a + a.transpose()).eval() / 2;
    const Mat once = mpopi::bound_covariance<double>(a, 0.05);
    const Mat twice = mpopi::bound_covariance<double>(once, 0.05);
    EXPECT_LE((once - twice).norm(), 1e-10);
  }
}

TEST(BoundCovariance, RejectsNonFinite) {
  Eigen::Matrix2d a = Eigen::Matrix2d::Identity();
  a(0, 1) = std::nan("");
  EXPECT_THROW(mpopi::bound_covariance<double>(a, 1e-6), mpopi::InputError);
}

TEST(CovarianceUpdate, RandomizedRoundTripsStayBounded) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double floor = 1e-6;
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + trial % 4, t_len = 1 + trial % 3, k = 1 + trial % 6;
    std::vector<Mat> covs;
    for (int t = 0; t < t_len; ++t) covs.push_back(random_spd(rng, m) * (trial % 2 ? 1e-7 : 1.0));
    Seq center(t_len, m);
    for (int i = 0; i < center.size(); ++i) center.data()[i] = g(rng);
    std::vector<Seq> samples;
    Eigen::VectorXd raw(k);
    for (int s = 0; s < k; ++s) {
      samples.push_back(center + (trial % 3 == 0 ? 0.0 : 1.0) * Seq::NullaryExpr(t_len, m, [&] { return g(rng); }));
      raw[s] = unit(rng) + 1e-3;
    }
    const mpopi::WeightVector<double> w{raw / raw.sum(), mpopi::WeightScheme::Softmax};
    const double alpha = 0.05 + 0.95 * unit(rng);
    const auto out = mpopi::weighted_cov_update<double>(covs, center, samples, w, alpha, floor);
    for (const auto& c : out) {
      EXPECT_LE((c - c.transpose()).norm(), 1e-10);
      const auto once = mpopi::bound_covariance<double>(c, floor);
      EXPECT_LE((once - c).norm(), 1e-10);
      const Eigen::SelfAdjointEigenSolver<Mat> eig(c);
      EXPECT_GE(eig.eigenvalues().minCoeff(), floor - 1e-12) << "trial " << trial;
    }
  }
}

TEST(CovarianceUpdate, ScalarHandArithmetic) {
  const std::vector<Mat> covs{Mat::Constant(1, 1, 1.0)};
  const std::vector<Seq> samples{scalar(2.0)};
  const auto w = mpopi::elite_uniform_weights(1, 1);
  const auto out = mpopi::weighted_cov_update<double>(covs, scalar(0.0), samples, w, 1.0, 1e-6);
  EXPECT_DOUBLE_EQ(out[0](0, 0), 4.0);
}

TEST(CovarianceUpdate, VanishingRateKeepsCovariance) {
  const Eigen::Matrix2d sigma{{2.0, 0.3}, {0.3, 1.0}};
  const std::vector<Mat> covs{sigma};
  const std::vector<Seq> samples{Seq::Constant(1, 2, 5.0), Seq::Constant(1, 2, -4.0)};
  const auto w = mpopi::elite_uniform_weights(2, 2);
  const double alpha = 1e-6;
  const auto out = mpopi::weighted_cov_update<double>(covs, Seq::Zero(1, 2), samples, w, alpha, 1e-6);
  const Eigen::Matrix2d scatter = Eigen::Matrix2d::Constant((25.0 + 16.0) / 2);
  EXPECT_LE((out[0] - ((1 - alpha) * sigma + alpha * scatter)).norm(), 1e-14);
  EXPECT_LE((out[0] - sigma).norm() / sigma.norm(), 1e-4);
}

TEST(CovarianceUpdate, SingleEliteAtCenterGivesFloor) {
  const std::vector<Mat> covs{Mat::Identity(2, 2), Mat::Identity(2, 2)};
  const Seq center = (Seq(2, 2) << 1, 2, 3, 4).finished();
  const std::vector<Seq> samples{center};
  const auto w = mpopi::elite_uniform_weights(1, 1);
  const auto out = mpopi::weighted_cov_update<double>(covs, center, samples, w, 1.0, 1e-6);
  for (const auto& c : out) EXPECT_LE((c - 1e-6 * Mat::Identity(2, 2)).norm(), 1e-18);
}

TEST(CovarianceUpdate, RejectsShapeMismatch) {
  const std::vector<Mat> covs{Mat::Identity(2, 2)};
  const std::vector<Seq> samples{Seq::Zero(3, 2)};
  const auto w = mpopi::elite_uniform_weights(1, 1);
  EXPECT_THROW(mpopi::weighted_cov_update<double>(covs, Seq::Zero(2, 2), samples, w, 1.0, 1e-6), mpopi::InputError);
}

TEST(MeanUpdate, ScalarHandArithmetic) {
  const std::vector<Seq> samples{scalar(1.0), scalar(3.0)};
  const auto w = mpopi::elite_uniform_weights(2, 2);
  EXPECT_DOUBLE_EQ(mpopi::weighted_mean_update<double>(scalar(0.0), samples, w, 0.5)(0, 0), 1.0);
}

TEST(MeanUpdate, FullRateEliminatesOldMean) {
  const std::vector<Seq> samples{scalar(0.25), scalar(1.5), scalar(-2.0)};
  const mpopi::WeightVector<double> w{Eigen::Vector3d(0.5, 0.25, 0.25), mpopi::WeightScheme::Softmax};
  EXPECT_EQ(mpopi::weighted_mean_update<double>(scalar(100.0), samples, w, 1.0)(0, 0), 0.125 + 0.375 - 0.5);
}

TEST(MeanUpdate, VanishingRateKeepsMean) {
  const Seq mean = (Seq(2, 1) << 2.0, -3.0).finished();
  const std::vector<Seq> samples{Seq::Constant(2, 1, 10.0)};
  const auto w = mpopi::elite_uniform_weights(1, 1);
  const Seq out = mpopi::weighted_mean_update<double>(mean, samples, w, 1e-6);
  EXPECT_LE((out - mean).cwiseAbs().maxCoeff() / mean.cwiseAbs().maxCoeff(), 1e-5);
}

TEST(MeanUpdate, RejectsBadInput) {
  const std::vector<Seq> samples{Seq::Zero(2, 1)};
  const auto w = mpopi::elite_uniform_weights(1, 1);
  EXPECT_THROW(mpopi::weighted_mean_update<double>(Seq::Zero(3, 1), samples, w, 1.0), mpopi::InputError);
  EXPECT_THROW(mpopi::weighted_mean_update<double>(Seq::Zero(2, 1), samples, w, 0.0), mpopi::ParameterError);
  EXPECT_THROW(mpopi::weighted_mean_update<double>(Seq::Zero(2, 1), samples, w, 1.5), mpopi::ParameterError);
}

TEST(ShiftPolicy, RepeatLast) {
  const Seq mean = (Seq(3, 1) << 1, 2, 3).finished();
  std::vector<Mat> covs{Mat::Constant(1, 1, 1), Mat::Constant(1, 1, 2), Mat::Constant(1, 1, 3)};
  const auto out = mpopi::shift_policy(mpopi::GaussianPolicy<double>(mean, covs), mpopi::ShiftFill::RepeatLast);
  EXPECT_EQ(out.mean(), (Seq(3, 1) << 2, 3, 3).finished());
  EXPECT_EQ(out.covariance(0)(0, 0), 2);
  EXPECT_EQ(out.covariance(1)(0, 0), 3);
  EXPECT_EQ(out.covariance(2)(0, 0), 3);
}

TEST(ShiftPolicy, ZeroFill) {
  const Seq mean = (Seq(2, 2) << 1, 2, 3, 4).finished();
  const auto p = mpopi::GaussianPolicy<double>::isotropic(2, 2, 0.5).with_mean(mean);
  const auto out = mpopi::shift_policy(p, mpopi::ShiftFill::Zero);
  EXPECT_EQ(out.mean(), (Seq(2, 2) << 3, 4, 0, 0).finished());
}

TEST(ShiftPolicy, ConstantSequenceIsFixedPoint) {
  const auto p = mpopi::GaussianPolicy<double>::isotropic(5, 2, 0.5).with_mean(Seq::Constant(5, 2, 0.7));
  EXPECT_EQ(mpopi::shift_policy(p).mean(), p.mean());
}

TEST(ShiftPolicy, HorizonShiftsEndConstant) {
  Seq mean(6, 2);
  for (int i = 0; i < mean.size(); ++i) mean.data()[i] = 0.1 * i * i;
  auto p = mpopi::GaussianPolicy<double>::isotropic(6, 2, 1.0).with_mean(mean);
  for (int i = 0; i < 6; ++i) p = mpopi::shift_policy(p);
  for (int t = 0; t < 6; ++t) EXPECT_EQ(p.mean().row(t), mean.row(5));
}

TEST(Exploration, DiagonalAndIdentity) {
  const Mat d = Eigen::Vector2d(2, 3).asDiagonal();
  EXPECT_DOUBLE_EQ(mpopi::exploration_magnitude(mpopi::GaussianPolicy<double>(Seq::Zero(4, 2), {4, d})), 3.0);
  EXPECT_DOUBLE_EQ(mpopi::exploration_magnitude(mpopi::GaussianPolicy<double>::isotropic(4, 3, 1.0)), 1.0);
}

TEST(Exploration, MaxOverHorizon) {
  std::vector<Mat> covs{Mat::Identity(2, 2), 5.0 * Mat::Identity(2, 2), 2.0 * Mat::Identity(2, 2)};
  EXPECT_DOUBLE_EQ(mpopi::exploration_magnitude(mpopi::GaussianPolicy<double>(Seq::Zero(3, 2), covs)), 5.0);
}

TEST(Exploration, MatchesPowerIteration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd a = random_spd(rng, 2 + trial % 4);
    EXPECT_NEAR(mpopi::largest_eigenvalue<double>(a), power_iteration(a), 1e-8 * power_iteration(a));
  }
}

TEST(Exploration, MatchesCharacteristicPolynomial) {
  const Eigen::Matrix2d a{{2.0, 0.7}, {0.7, 1.2}};
  const double tr = a.trace(), det = a.determinant();
  EXPECT_NEAR(mpopi::largest_eigenvalue<double>(a), tr / 2 + std::sqrt(tr * tr / 4 - det), 1e-12);
}

TEST(Policy, SinglePrecisionInstantiation) {
  const auto p = mpopi::GaussianPolicy<float>::isotropic(3, 2, 0.5f);
  EXPECT_FLOAT_EQ(mpopi::exploration_magnitude(p), 0.5f);
  const auto b = mpopi::bound_covariance<float>(Eigen::Matrix2f::Zero(), 1e-3f);
  EXPECT_FLOAT_EQ(b(0, 0), 1e-3f);
}

TEST(Policy, RejectsInvalidShapes) {
  EXPECT_THROW(mpopi::GaussianPolicy<double>(Seq::Zero(3, 2), {2, Mat::Identity(2, 2)}), mpopi::InputError);
  EXPECT_THROW(mpopi::GaussianPolicy<double>(Seq::Zero(3, 2), {Mat::Identity(3, 3)}), mpopi::InputError);
}

}  // namespace
