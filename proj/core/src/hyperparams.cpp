#include "cipca/hyperparams.hpp"

#include <algorithm>
#include <limits>

#include "cipca/error.hpp"
#include "cipca/parallel.hpp"
#include "log.hpp"

namespace cipca {

double training_sharpe(const EstimationPanel& train, const RestrictionMask& mask,
                       const GridOptions& options) {
  FactorReturnSeries F;
  if (options.factor_burn_in == 0) {
    const FittedModel model = fit(train, mask, options.fit);
    F.F = model.factors;
    F.dates = model.return_dates;
  } else {
    OosOptions oo;
    oo.burn_in = options.factor_burn_in;
    oo.fit = options.fit;
    F = oos_factor_returns(train, mask, oo);
  }
  F.names = mask.factor_names;
  return tangency_backtest(F, options.tangency).sharpe;
}

GridResult grid_search(const EstimationPanel& train, const SimilarityMatrix& S,
                       const Partition& prior, const GridSpec& grid, const GridOptions& options) {
  if (grid.knn.empty() || grid.m.empty()) throw PreconditionError("grid search needs nonempty grids");
  std::vector<int> ms = grid.m, knns = grid.knn;
  std::sort(ms.begin(), ms.end());
  ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
  std::sort(knns.begin(), knns.end());
  knns.erase(std::unique(knns.begin(), knns.end()), knns.end());

  GridResult out;
  for (int m : ms) {
    for (int k : knns) out.cells.push_back({m, k, 0, 0.0, {}});
  }
  std::vector<ClusteringResult> results(out.cells.size());
  parallel_for(out.cells.size(), options.jobs, [&](std::size_t c) {
    GridCell& cell = out.cells[c];
    try {
      results[c] = cluster_characteristics(S, prior, cell.knn, cell.m, options.constrained, grid.f,
                                           grid.eta, grid.K_max);
      cell.K = results[c].partition.K;
      const RestrictionMask mask = restriction_mask_from_partition(results[c].partition, options.include_zc);
      cell.sharpe = training_sharpe(train, mask, options);
    } catch (const Error& e) {
      cell.sharpe = -std::numeric_limits<double>::infinity();
      cell.error = e.what();
    }
  });

  std::size_t best = out.cells.size();
  for (std::size_t c = 0; c < out.cells.size(); ++c) {
    const GridCell& cell = out.cells[c];
    if (!cell.error.empty()) {
      log::info("grid cell m={} knn={} failed: {}", cell.m, cell.knn, cell.error);
      continue;
    }
    if (best == out.cells.size() || cell.sharpe > out.cells[best].sharpe) best = c;
  }
  if (best == out.cells.size()) throw Error("every grid-search cell failed: " + out.cells.front().error);
  const GridCell& b = out.cells[best];
  out.best = HyperParams{b.knn, b.m, b.K, grid.f, grid.eta};
  out.clustering = std::move(results[best]);
  return out;
}

}  // namespace cipca
