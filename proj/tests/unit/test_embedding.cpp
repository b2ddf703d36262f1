#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cipca/embedding.hpp"
#include "cipca/error.hpp"

using namespace cipca;

namespace {

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd D(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j) D(i, j) = (X.row(i) - X.row(j)).norm();
  return D;
}

}  // namespace

TEST(Mds, PlanarConfigurationIsRecovered) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd X(10, 2);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  const Eigen::MatrixXd D = pairwise(X);
  const auto e = mds_embed(D);
  EXPECT_LT(e.stress, 1e-6);
  EXPECT_LT((pairwise(e.coords) - D).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Mds, EquilateralTriangle) {
  Eigen::MatrixXd D = Eigen::MatrixXd::Ones(3, 3);
  D.diagonal().setZero();
  const auto e = mds_embed(D);
  EXPECT_LT(e.stress, 1e-6);
  EXPECT_NEAR((e.coords.row(0) - e.coords.row(1)).norm(), 1.0, 1e-6);
  EXPECT_NEAR((e.coords.row(1) - e.coords.row(2)).norm(), 1.0, 1e-6);
}

TEST(Mds, UnitSquare) {
  Eigen::MatrixXd X(4, 2);
  X << 0, 0, 1, 0, 1, 1, 0, 1;
  const auto e = mds_embed(pairwise(X));
  EXPECT_LT(e.stress, 1e-6);
  EXPECT_NEAR((e.coords.row(0) - e.coords.row(2)).norm(), std::sqrt(2.0), 1e-6);
}

TEST(Mds, StressPathNonIncreasing) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 1);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(12, 12);
  for (int i = 0; i < 12; ++i)
    for (int j = i + 1; j < 12; ++j) D(i, j) = D(j, i) = u(rng);
  const auto e = mds_embed(D);
  ASSERT_GE(e.stress_path.size(), 2u);
  for (std::size_t i = 1; i < e.stress_path.size(); ++i)
    EXPECT_LE(e.stress_path[i], e.stress_path[i - 1] * (1 + 1e-12) + 1e-15);
  EXPECT_NEAR(stress1(D, e.coords), e.stress, 1e-12);
  EXPECT_GT(e.stress, 0.0);
}

TEST(Mds, PermutationInvariantStress) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 1);
  const int n = 9;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) D(i, j) = D(j, i) = u(rng);
  Eigen::VectorXi perm(n);
  for (int i = 0; i < n; ++i) perm(i) = (i * 4 + 1) % n;
  Eigen::MatrixXd P(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) P(i, j) = D(perm(i), perm(j));
  EXPECT_NEAR(mds_embed(D).stress, mds_embed(P).stress, 1e-4);
}

TEST(Mds, Errors) {
  EXPECT_THROW(mds_embed(Eigen::MatrixXd::Zero(4, 4)), DomainError);
  Eigen::MatrixXd asym = Eigen::MatrixXd::Ones(3, 3);
  asym.diagonal().setZero();
  asym(0, 1) = 2;
  EXPECT_THROW(mds_embed(asym), PreconditionError);
  Eigen::MatrixXd neg = Eigen::MatrixXd::Ones(3, 3);
  neg.diagonal().setZero();
  neg(0, 2) = neg(2, 0) = -1;
  EXPECT_THROW(mds_embed(neg), PreconditionError);
}
