#include "cipca/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "cipca/error.hpp"
#include "cipca/parallel.hpp"

namespace cipca {

double rank_correlation(const RankPanel& ranks, std::size_t i, std::size_t j,
                        const WeightSeries& weights, MonthWindow window) {
  if (ranks.ranks.size() != weights.w.size()) {
    throw PreconditionError("rank panel and weights cover different month counts");
  }
  if (i == j) return 1.0;
  const std::size_t T = ranks.ranks.size();
  const std::size_t first = std::min(window.first, T);
  const std::size_t last = window.count >= T - first ? T : first + window.count;
  const auto ci = static_cast<Eigen::Index>(i);
  const auto cj = static_cast<Eigen::Index>(j);

  double total = 0;
  std::size_t used = 0;
  for (std::size_t t = first; t < last; ++t) {
    if (!ranks.present[t][i] || !ranks.present[t][j]) continue;
    const Eigen::MatrixXd& R = ranks.ranks[t];
    const Eigen::VectorXd& w = weights.w[t];
    const Eigen::Index n = R.rows();
    double mi = 0, mj = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
      mi += w(a) * R(a, ci);
      mj += w(a) * R(a, cj);
    }
    double cov = 0, vi = 0, vj = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
      const double di = R(a, ci) - mi;
      const double dj = R(a, cj) - mj;
      cov += w(a) * di * dj;
      vi += w(a) * di * di;
      vj += w(a) * dj * dj;
    }
    if (!(vi > 0) || !(vj > 0)) continue;
    total += std::clamp(cov / (std::sqrt(vi) * std::sqrt(vj)), -1.0, 1.0);
    ++used;
  }
  if (used == 0) throw UndefinedCorrelationError(i, j);
  return total / static_cast<double>(used);
}

double similarity_from_correlation(double rho) { return std::exp(-(1.0 - std::abs(rho))); }

SimilarityMatrix similarity_matrix(const RankPanel& ranks, const WeightSeries& weights,
                                   std::vector<std::string> names, MonthWindow window,
                                   unsigned jobs) {
  const std::size_t I = ranks.ranks.empty() ? names.size()
                                            : static_cast<std::size_t>(ranks.ranks.front().cols());
  if (names.size() != I) throw PreconditionError("characteristic names do not match rank panel");
  SimilarityMatrix out;
  out.names = std::move(names);
  const auto n = static_cast<Eigen::Index>(I);
  out.rho = Eigen::MatrixXd::Identity(n, n);
  out.S = Eigen::MatrixXd::Identity(n, n);
  // One row of the upper triangle per task; each pair is written by one task only.
  parallel_for(I, jobs, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < I; ++j) {
      const double rho = rank_correlation(ranks, i, j, weights, window);
      const auto a = static_cast<Eigen::Index>(i);
      const auto b = static_cast<Eigen::Index>(j);
      out.rho(a, b) = out.rho(b, a) = rho;
      out.S(a, b) = out.S(b, a) = similarity_from_correlation(rho);
    }
  });
  return out;
}

DistanceMatrix to_distance(const SimilarityMatrix& S) {
  const Eigen::Index n = S.S.rows();
  DistanceMatrix out;
  out.names = S.names;
  out.D.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = S.S(i, j);
      if (!(s > 0)) {
        throw DomainError("nonpositive similarity at (" + std::to_string(i) + ", " +
                          std::to_string(j) + ")");
      }
      out.D(i, j) = i == j ? 0.0 : 1.0 / s - 1.0;
    }
  }
  return out;
}

Eigen::MatrixXd similarity_from_distance(const Eigen::MatrixXd& D) {
  return (1.0 + D.array()).inverse().matrix();
}

}  // namespace cipca
