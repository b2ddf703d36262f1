#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "cipca/similarity.hpp"

namespace cipca {

struct Embedding {
  std::vector<std::string> names;
  Eigen::MatrixXd coords;  // I x 2
  double stress = 0;       // Stress-1: sqrt(sum (d - dhat)^2 / sum d^2)
  int iterations = 0;
  std::vector<double> stress_path;  // initial value, then one entry per iteration
};

struct MdsOptions {
  double tol = 1e-9;  // relative change in raw stress
  int max_iter = 2000;
  std::uint64_t seed = 0;  // only used to jitter a degenerate start
};

double stress1(const Eigen::MatrixXd& D, const Eigen::MatrixXd& coords);

// Metric MDS in two dimensions: classical scaling start, then SMACOF
// (Guttman transform) iterations with unit weights.
Embedding mds_embed(const Eigen::MatrixXd& D, const MdsOptions& options = {});
Embedding mds_embed(const DistanceMatrix& D, const MdsOptions& options = {});

}  // namespace cipca
