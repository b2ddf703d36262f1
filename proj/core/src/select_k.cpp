#include <cmath>
#include <limits>
#include <map>

#include "cipca/clustering.hpp"
#include "cipca/error.hpp"
#include "log.hpp"

namespace cipca {
namespace {

double reciprocal(double max_ris) {
  if (max_ris == 0.0) return std::numeric_limits<double>::infinity();
  if (std::isinf(max_ris)) return 0.0;
  return 1.0 / max_ris;
}

}  // namespace

SelectKResult select_K(const MergeTrace& trace, int m, double f, double eta) {
  if (!(f > 0) || !(eta > 1)) throw PreconditionError("select_K needs f > 0 and eta > 1");
  if (m < 1) throw PreconditionError("select_K needs m >= 1");
  // Max_RIS indexed by the cluster count the merge produced.
  std::map<int, double> by_k;
  for (const auto& step : trace.steps) by_k[step.resulting_k] = step.max_ris;
  for (int K = 1; K < m; ++K) {
    if (!by_k.count(K)) {
      throw PreconditionError("merge trace does not cover K=" + std::to_string(K));
    }
  }
  if (m == 1) return {1, 0, false};

  const int half = m / 2;
  double baseline = 0;
  int count = 0;
  for (int K = half; K <= m - 1; ++K) {
    baseline += reciprocal(by_k[K]);
    ++count;
  }
  baseline /= count;

  double scale = f;
  for (int i = 0; i <= kMaxRelaxations; ++i) {
    const double threshold = scale * baseline;
    for (int K = half - 1; K >= 1; --K) {
      if (reciprocal(by_k[K]) >= threshold) return {K + 1, i, false};
    }
    scale /= eta;
  }
  const int fallback = std::max(1, half - 1);
  log::warn("select_K: no Max_RIS drop after {} relaxations; using K={}", kMaxRelaxations, fallback);
  return {fallback, kMaxRelaxations, true};
}

}  // namespace cipca
