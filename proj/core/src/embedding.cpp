#include "cipca/embedding.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>

#include "cipca/error.hpp"

namespace cipca {

namespace {

Eigen::MatrixXd pairwise(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) out(i, j) = out(j, i) = (X.row(i) - X.row(j)).norm();
  }
  return out;
}

double raw_stress(const Eigen::MatrixXd& D, const Eigen::MatrixXd& Dhat) {
  double s = 0;
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < D.rows(); ++j) s += (D(i, j) - Dhat(i, j)) * (D(i, j) - Dhat(i, j));
  }
  return s;
}

void check_distances(const Eigen::MatrixXd& D) {
  if (D.rows() != D.cols()) throw PreconditionError("distance matrix must be square");
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    if (D(i, i) != 0.0) throw PreconditionError("distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < D.cols(); ++j) {
      if (!(D(i, j) >= 0) || D(i, j) != D(j, i)) {
        throw PreconditionError("distance matrix must be symmetric and nonnegative");
      }
    }
  }
}

}  // namespace

double stress1(const Eigen::MatrixXd& D, const Eigen::MatrixXd& coords) {
  const double denom = D.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().squaredNorm();
  if (!(denom > 0)) throw DomainError("stress undefined for an all-zero distance matrix");
  return std::sqrt(raw_stress(D, pairwise(coords)) / denom);
}

Embedding mds_embed(const Eigen::MatrixXd& D, const MdsOptions& options) {
  check_distances(D);
  const Eigen::Index n = D.rows();
  const double denom = D.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().squaredNorm();
  if (!(denom > 0)) throw DomainError("cannot embed an all-zero distance matrix");

  // Classical scaling.
  const Eigen::MatrixXd C = Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  const Eigen::MatrixXd B = -0.5 * C * D.cwiseAbs2() * C;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(B);
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, 2);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(2, n); ++k) {
    const Eigen::Index col = n - 1 - k;  // eigenvalues ascending
    const double lambda = eig.eigenvalues()(col);
    if (lambda > 0) X.col(k) = std::sqrt(lambda) * eig.eigenvectors().col(col);
  }
  if (X.norm() < 1e-12 * std::sqrt(denom)) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    const double scale = std::sqrt(denom / static_cast<double>(n * n));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index k = 0; k < 2; ++k) X(i, k) = scale * z(rng);
    }
  }

  Embedding out;
  Eigen::MatrixXd Dhat = pairwise(X);
  double sigma = raw_stress(D, Dhat);
  out.stress_path.push_back(std::sqrt(sigma / denom));
  for (int it = 1; it <= options.max_iter; ++it) {
    if (sigma <= 1e-30 * denom) break;
    Eigen::MatrixXd Bx = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i != j && Dhat(i, j) > 0) Bx(i, j) = -D(i, j) / Dhat(i, j);
      }
      Bx(i, i) = -Bx.row(i).sum();
    }
    X = Bx * X / static_cast<double>(n);
    Dhat = pairwise(X);
    const double next = raw_stress(D, Dhat);
    out.stress_path.push_back(std::sqrt(next / denom));
    out.iterations = it;
    const double change = (sigma - next) / std::max(sigma, 1e-300);
    sigma = next;
    if (change < options.tol) break;
  }
  out.coords = X;
  out.stress = std::sqrt(sigma / denom);
  return out;
}

Embedding mds_embed(const DistanceMatrix& D, const MdsOptions& options) {
  Embedding e = mds_embed(D.D, options);
  e.names = D.names;
  return e;
}

}  // namespace cipca
