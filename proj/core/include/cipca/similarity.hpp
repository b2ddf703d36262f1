#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "cipca/panel.hpp"

namespace cipca {

// Averaging window over months of the rank panel. The default covers every month.
struct MonthWindow {
  std::size_t first = 0;
  std::size_t count = std::numeric_limits<std::size_t>::max();
};

struct SimilarityMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd S;    // exp(-(1 - |rho|))
  Eigen::MatrixXd rho;  // time-averaged weighted rank correlations
};

struct DistanceMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd D;  // 1/s - 1
};

// Time-series average of the weighted cross-sectional correlation of ranks of
// characteristics i and j. Months where either column is entirely missing, or
// has zero weighted variance, are skipped.
double rank_correlation(const RankPanel& ranks, std::size_t i, std::size_t j,
                        const WeightSeries& weights, MonthWindow window = {});

double similarity_from_correlation(double rho);

SimilarityMatrix similarity_matrix(const RankPanel& ranks, const WeightSeries& weights,
                                   std::vector<std::string> names, MonthWindow window = {},
                                   unsigned jobs = 1);

DistanceMatrix to_distance(const SimilarityMatrix& S);
// Inverse of to_distance: s = 1 / (1 + d).
Eigen::MatrixXd similarity_from_distance(const Eigen::MatrixXd& D);

}  // namespace cipca
