#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "cipca/clustering.hpp"
#include "cipca/error.hpp"

namespace cipca {

Partition Partition::from_clusters(const std::vector<VertexSet>& clusters, std::size_t n) {
  Partition p;
  p.assignment.assign(n, -1);
  p.K = static_cast<int>(clusters.size());
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    for (std::size_t v : clusters[k]) {
      if (v >= n) throw ValidationError("cluster member " + std::to_string(v) + " out of range");
      if (p.assignment[v] >= 0) {
        throw ValidationError("characteristic " + std::to_string(v) + " is in two clusters");
      }
      p.assignment[v] = static_cast<int>(k);
    }
  }
  p.validate();
  return p;
}

Partition Partition::single(std::size_t n) {
  Partition p;
  p.assignment.assign(n, 0);
  p.K = n > 0 ? 1 : 0;
  return p;
}

std::vector<VertexSet> Partition::clusters() const {
  std::vector<VertexSet> out(static_cast<std::size_t>(std::max(K, 0)));
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    const int k = assignment[v];
    if (k >= 0 && k < K) out[static_cast<std::size_t>(k)].push_back(v);
  }
  return out;
}

void Partition::validate() const {
  if (K < 1) throw ValidationError("partition has no clusters");
  std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    const int k = assignment[v];
    if (k < 0 || k >= K) {
      throw ValidationError("characteristic " + std::to_string(v) + " has no valid cluster");
    }
    ++counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < K; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw ValidationError("cluster " + std::to_string(k) + " is empty");
    }
  }
  if (!labels.empty() && labels.size() != static_cast<std::size_t>(K)) {
    throw ValidationError("partition has " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(K) + " clusters");
  }
}

Partition Partition::canonical() const {
  std::vector<int> remap(static_cast<std::size_t>(std::max(K, 0)), -1);
  Partition out;
  out.K = K;
  out.assignment.resize(assignment.size());
  int next = 0;
  for (std::size_t v = 0; v < assignment.size(); ++v) {
    int& r = remap[static_cast<std::size_t>(assignment[v])];
    if (r < 0) r = next++;
    out.assignment[v] = r;
  }
  if (!labels.empty()) {
    out.labels.resize(labels.size());
    for (std::size_t k = 0; k < labels.size(); ++k) {
      if (remap[k] >= 0) out.labels[static_cast<std::size_t>(remap[k])] = labels[k];
    }
  }
  return out;
}

double adjusted_rand_index(const Partition& a, const Partition& b) {
  if (a.size() != b.size()) throw PreconditionError("partitions cover different item counts");
  const std::size_t n = a.size();
  auto choose2 = [](double x) { return 0.5 * x * (x - 1.0); };
  std::map<std::pair<int, int>, double> table;
  std::map<int, double> rows, cols;
  for (std::size_t v = 0; v < n; ++v) {
    table[{a.assignment[v], b.assignment[v]}] += 1;
    rows[a.assignment[v]] += 1;
    cols[b.assignment[v]] += 1;
  }
  double index = 0, sum_a = 0, sum_b = 0;
  for (const auto& [key, c] : table) index += choose2(c);
  for (const auto& [key, c] : rows) sum_a += choose2(c);
  for (const auto& [key, c] : cols) sum_b += choose2(c);
  const double total = choose2(static_cast<double>(n));
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return a.canonical().assignment == b.canonical().assignment ? 1.0 : 0.0;
  return (index - expected) / (max_index - expected);
}

void HyperParams::validate(std::size_t I) const {
  if (knn < 1) throw PreconditionError("knn must be at least 1");
  if (K < 1 || K > m || static_cast<std::size_t>(m) > I) {
    throw PreconditionError("hyperparameters must satisfy 1 <= K <= m <= I");
  }
  if (!(f > 1) || !(eta > 1)) throw PreconditionError("f and eta must exceed 1");
}

std::pair<Partition, MergeTrace> merge_ris(const std::vector<VertexSet>& subclusters,
                                           const SparseGraph& graph, int K_target) {
  const int m = static_cast<int>(subclusters.size());
  if (K_target < 1 || K_target > m) {
    throw PreconditionError("K_target=" + std::to_string(K_target) + " outside [1, " +
                            std::to_string(m) + "]");
  }
  MergeTrace trace;
  trace.basic_subclusters = subclusters;
  for (auto& c : trace.basic_subclusters) std::sort(c.begin(), c.end());

  std::vector<VertexSet> members = trace.basic_subclusters;
  std::vector<bool> alive(static_cast<std::size_t>(m), true);
  for (int K = m; K > K_target; --K) {
    int best_a = -1, best_b = -1;
    double best = -1.0;
    for (int a = 0; a < m; ++a) {
      if (!alive[static_cast<std::size_t>(a)]) continue;
      for (int b = a + 1; b < m; ++b) {
        if (!alive[static_cast<std::size_t>(b)]) continue;
        const double r = ris(graph, members[static_cast<std::size_t>(a)],
                             members[static_cast<std::size_t>(b)]);
        if (r > best) {
          best = r;
          best_a = a;
          best_b = b;
        }
      }
    }
    auto& into = members[static_cast<std::size_t>(best_a)];
    auto& from = members[static_cast<std::size_t>(best_b)];
    into.insert(into.end(), from.begin(), from.end());
    std::sort(into.begin(), into.end());
    from.clear();
    alive[static_cast<std::size_t>(best_b)] = false;
    trace.steps.push_back({best_a, best_b, best, K - 1});
  }

  std::vector<VertexSet> live;
  for (int a = 0; a < m; ++a) {
    if (alive[static_cast<std::size_t>(a)]) live.push_back(members[static_cast<std::size_t>(a)]);
  }
  return {Partition::from_clusters(live, graph.size()).canonical(), std::move(trace)};
}

Partition partition_at(const MergeTrace& trace, std::size_t num_vertices, int K) {
  const int m = static_cast<int>(trace.basic_subclusters.size());
  if (K < 1 || K > m || static_cast<std::size_t>(m - K) > trace.steps.size()) {
    throw PreconditionError("merge trace does not reach K=" + std::to_string(K));
  }
  std::vector<VertexSet> members = trace.basic_subclusters;
  std::vector<bool> alive(members.size(), true);
  for (int s = 0; s < m - K; ++s) {
    const auto& step = trace.steps[static_cast<std::size_t>(s)];
    auto& into = members[static_cast<std::size_t>(step.cluster_a)];
    auto& from = members[static_cast<std::size_t>(step.cluster_b)];
    into.insert(into.end(), from.begin(), from.end());
    from.clear();
    alive[static_cast<std::size_t>(step.cluster_b)] = false;
  }
  std::vector<VertexSet> live;
  for (std::size_t a = 0; a < members.size(); ++a) {
    if (alive[a]) live.push_back(members[a]);
  }
  return Partition::from_clusters(live, num_vertices).canonical();
}

Partition random_partition(std::size_t I, int K, std::uint64_t seed) {
  if (K < 1 || static_cast<std::size_t>(K) > I) {
    throw PreconditionError("random partition needs 1 <= K <= I (K=" + std::to_string(K) +
                            ", I=" + std::to_string(I) + ")");
  }
  // log_ways(n, u): log of the number of ways to place n more items so that the
  // u still-empty clusters all get filled. Sampling item by item with these
  // counts is exactly uniform over surjections.
  const std::size_t U = static_cast<std::size_t>(K);
  const double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> log_ways(I + 1, std::vector<double>(U + 1, kNegInf));
  log_ways[0][0] = 0.0;
  auto log_add = [](double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
  };
  for (std::size_t n = 1; n <= I; ++n) {
    for (std::size_t u = 0; u <= U; ++u) {
      double v = kNegInf;
      const std::size_t covered = U - u;
      if (covered > 0 && log_ways[n - 1][u] > kNegInf) {
        v = std::log(static_cast<double>(covered)) + log_ways[n - 1][u];
      }
      if (u > 0 && log_ways[n - 1][u - 1] > kNegInf) {
        v = log_add(v, std::log(static_cast<double>(u)) + log_ways[n - 1][u - 1]);
      }
      log_ways[n][u] = v;
    }
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<int> assignment(I);
  std::vector<int> covered_ids;
  std::vector<int> empty_ids(U);
  std::iota(empty_ids.begin(), empty_ids.end(), 0);
  for (std::size_t item = 0; item < I; ++item) {
    const std::size_t n = I - item;
    const std::size_t u = empty_ids.size();
    const std::size_t covered = U - u;
    double p_covered = 0.0;
    if (covered > 0 && log_ways[n - 1][u] > kNegInf) {
      p_covered = std::exp(std::log(static_cast<double>(covered)) + log_ways[n - 1][u] - log_ways[n][u]);
    }
    if (unit(rng) < p_covered) {
      std::uniform_int_distribution<std::size_t> pick(0, covered_ids.size() - 1);
      assignment[item] = covered_ids[pick(rng)];
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, empty_ids.size() - 1);
      const std::size_t slot = pick(rng);
      assignment[item] = empty_ids[slot];
      covered_ids.push_back(empty_ids[slot]);
      empty_ids.erase(empty_ids.begin() + static_cast<std::ptrdiff_t>(slot));
    }
  }
  Partition p;
  p.assignment = std::move(assignment);
  p.K = K;
  p.validate();
  return p.canonical();
}

ClusteringResult cluster_characteristics(const SimilarityMatrix& S, const Partition& prior, int knn,
                                         int m, bool constrained, double f, double eta, int K_max) {
  const std::size_t I = static_cast<std::size_t>(S.S.rows());
  const SparseGraph graph = knn_sparsify(S, knn);
  const auto subclusters = split_subclusters(graph, prior, m, constrained);
  ClusteringResult out;
  out.trace = merge_ris(subclusters, graph, 1).second;
  out.selection = select_K(out.trace, m, f, eta);
  int K = out.selection.K;
  if (K_max > 0) K = std::min(K, K_max);
  out.partition = partition_at(out.trace, I, K);
  return out;
}

}  // namespace cipca
