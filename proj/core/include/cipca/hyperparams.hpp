#pragma once

#include <string>
#include <vector>

#include "cipca/clustering.hpp"
#include "cipca/evaluation.hpp"
#include "cipca/factor_model.hpp"
#include "cipca/similarity.hpp"

namespace cipca {

struct GridSpec {
  std::vector<int> knn;
  std::vector<int> m;
  double f = 1e3;
  double eta = 1.3;
  int K_max = 15;
};

struct GridOptions {
  bool constrained = true;  // split inside the prior clusters (DC) or from scratch (PDC)
  bool include_zc = true;
  // 0: score factors fitted on the whole training window; otherwise rolling
  // out-of-sample factors inside the window after this many months.
  std::size_t factor_burn_in = 0;
  TangencyOptions tangency;
  FitOptions fit;
  unsigned jobs = 1;
};

struct GridCell {
  int m = 0;
  int knn = 0;
  int K = 0;
  double sharpe = 0;  // -inf when the cell failed
  std::string error;
};

struct GridResult {
  HyperParams best;
  ClusteringResult clustering;
  std::vector<GridCell> cells;  // ordered by (m, knn)
};

// Scores every (m, knn) cell by the tangency Sharpe of its C-IPCA factors on
// `train`. Highest score wins; ties go to the smaller m, then the smaller knn.
GridResult grid_search(const EstimationPanel& train, const SimilarityMatrix& S,
                       const Partition& prior, const GridSpec& grid, const GridOptions& options = {});

// Tangency Sharpe of the factors implied by `mask` on `train` (the grid objective).
double training_sharpe(const EstimationPanel& train, const RestrictionMask& mask,
                       const GridOptions& options);

}  // namespace cipca
