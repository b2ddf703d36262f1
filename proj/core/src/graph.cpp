#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cipca/clustering.hpp"
#include "cipca/error.hpp"

namespace cipca {

SparseGraph::SparseGraph(std::size_t n)
    : n_(n),
      w_(Eigen::MatrixXd::Zero(idx(n), idx(n))),
      adj_(Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(idx(n), idx(n), false)) {}

void SparseGraph::add_edge(std::size_t i, std::size_t j, double weight) {
  if (i == j) throw PreconditionError("self-loops are not allowed");
  if (i >= n_ || j >= n_) throw PreconditionError("edge endpoint out of range");
  w_(idx(i), idx(j)) = w_(idx(j), idx(i)) = weight;
  adj_(idx(i), idx(j)) = adj_(idx(j), idx(i)) = true;
}

std::size_t SparseGraph::edge_count() const {
  return static_cast<std::size_t>(adj_.count()) / 2;
}

std::vector<std::pair<std::size_t, std::size_t>> SparseGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if (has_edge(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

SparseGraph knn_sparsify(const Eigen::MatrixXd& S, int knn) {
  if (knn < 1) throw PreconditionError("knn must be at least 1");
  const auto n = static_cast<std::size_t>(S.rows());
  SparseGraph graph(n);
  if (n < 2) return graph;
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(knn), n - 1);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    order.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    const auto ii = static_cast<Eigen::Index>(i);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return S(ii, static_cast<Eigen::Index>(a)) > S(ii, static_cast<Eigen::Index>(b));
    });
    for (std::size_t r = 0; r < k; ++r) {
      graph.add_edge(i, order[r], S(ii, static_cast<Eigen::Index>(order[r])));
    }
  }
  return graph;
}

SparseGraph knn_sparsify(const SimilarityMatrix& S, int knn) { return knn_sparsify(S.S, knn); }

namespace {

// Connected components of the induced subgraph, each sorted, ordered by smallest member.
std::vector<VertexSet> components(const SparseGraph& graph, const VertexSet& vertices) {
  const std::size_t n = vertices.size();
  std::vector<int> comp(n, -1);
  std::vector<VertexSet> out;
  for (std::size_t s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    const int id = static_cast<int>(out.size());
    out.emplace_back();
    std::vector<std::size_t> stack = {s};
    comp[s] = id;
    while (!stack.empty()) {
      const std::size_t a = stack.back();
      stack.pop_back();
      out.back().push_back(vertices[a]);
      for (std::size_t b = 0; b < n; ++b) {
        if (comp[b] < 0 && graph.has_edge(vertices[a], vertices[b])) {
          comp[b] = id;
          stack.push_back(b);
        }
      }
    }
    std::sort(out.back().begin(), out.back().end());
  }
  return out;
}

std::pair<VertexSet, VertexSet> ordered_sides(VertexSet a, VertexSet b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.empty() || (!b.empty() && b.front() < a.front())) std::swap(a, b);
  return {std::move(a), std::move(b)};
}

}  // namespace

std::pair<VertexSet, VertexSet> spectral_bisect(const SparseGraph& graph, const VertexSet& input) {
  if (input.size() < 2) throw InfeasibleSplitError("cannot bisect a cluster of size < 2");
  VertexSet vertices = input;
  std::sort(vertices.begin(), vertices.end());
  const std::size_t n = vertices.size();

  // A disconnected subgraph already has a zero-similarity cut: split off the
  // largest component (lowest smallest-member on ties).
  auto comps = components(graph, vertices);
  if (comps.size() > 1) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < comps.size(); ++c) {
      if (comps[c].size() > comps[best].size()) best = c;
    }
    VertexSet rest;
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (c != best) rest.insert(rest.end(), comps[c].begin(), comps[c].end());
    }
    return ordered_sides(comps[best], rest);
  }

  const auto N = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd A(N, N);
  for (Eigen::Index a = 0; a < N; ++a) {
    for (Eigen::Index b = 0; b < N; ++b) {
      A(a, b) = a == b ? 0.0 : graph.weight(vertices[static_cast<std::size_t>(a)],
                                             vertices[static_cast<std::size_t>(b)]);
    }
  }
  const Eigen::VectorXd deg = A.rowwise().sum();
  const Eigen::VectorXd inv_sqrt = deg.array().rsqrt();
  Eigen::MatrixXd L = -(inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal());
  L.diagonal().array() += 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(L);
  Eigen::VectorXd y = inv_sqrt.asDiagonal() * eig.eigenvectors().col(1);

  // Fix the eigenvector sign: first clearly nonzero entry positive.
  const double tiny = 1e-12 * y.cwiseAbs().maxCoeff();
  for (Eigen::Index a = 0; a < N; ++a) {
    if (std::abs(y(a)) > tiny) {
      if (y(a) < 0) y = -y;
      break;
    }
  }
  VertexSet pos, neg;
  for (Eigen::Index a = 0; a < N; ++a) {
    (y(a) >= -tiny ? pos : neg).push_back(vertices[static_cast<std::size_t>(a)]);
  }
  if (pos.empty() || neg.empty()) {
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return y(a) < y(b); });
    pos.clear();
    neg.clear();
    for (std::size_t r = 0; r < n; ++r) {
      (r < n / 2 ? neg : pos).push_back(vertices[static_cast<std::size_t>(order[r])]);
    }
  }
  return ordered_sides(std::move(pos), std::move(neg));
}

std::vector<VertexSet> split_subclusters(const SparseGraph& graph, const Partition& prior, int m,
                                         bool constrained) {
  const std::size_t I = graph.size();
  if (m < 1 || static_cast<std::size_t>(m) > I) {
    throw PreconditionError("number of sub-clusters m=" + std::to_string(m) + " outside [1, " +
                            std::to_string(I) + "]");
  }
  std::vector<VertexSet> live;
  if (constrained) {
    if (prior.size() != I) throw PreconditionError("prior partition does not cover the graph");
    prior.validate();
    live = prior.clusters();
    if (static_cast<std::size_t>(m) < live.size()) {
      throw PreconditionError("m=" + std::to_string(m) + " is below the number of prior clusters (" +
                              std::to_string(live.size()) + ")");
    }
  } else {
    VertexSet all(I);
    std::iota(all.begin(), all.end(), std::size_t{0});
    live.push_back(std::move(all));
  }
  for (auto& c : live) std::sort(c.begin(), c.end());

  while (live.size() < static_cast<std::size_t>(m)) {
    std::size_t largest = 0;
    for (std::size_t c = 1; c < live.size(); ++c) {
      if (live[c].size() > live[largest].size() ||
          (live[c].size() == live[largest].size() && live[c].front() < live[largest].front())) {
        largest = c;
      }
    }
    if (live[largest].size() < 2) {
      throw InfeasibleSplitError("all sub-clusters are singletons before reaching m=" +
                                 std::to_string(m));
    }
    auto [a, b] = spectral_bisect(graph, live[largest]);
    live[largest] = std::move(a);
    live.push_back(std::move(b));
  }
  std::sort(live.begin(), live.end(),
            [](const VertexSet& a, const VertexSet& b) { return a.front() < b.front(); });
  return live;
}

double inter_similarity(const SparseGraph& graph, const VertexSet& first, const VertexSet& second) {
  if (first.empty() || second.empty()) return 0.0;
  // Fixed summation order so the value is exactly symmetric in its arguments.
  const bool swap = second < first;
  const VertexSet& a = swap ? second : first;
  const VertexSet& b = swap ? first : second;
  double sum = 0;
  for (std::size_t u : a) {
    for (std::size_t v : b) sum += graph.weight(u, v);
  }
  return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

double intra_similarity(const SparseGraph& graph, const VertexSet& c) {
  if (c.size() < 2) return 0.0;
  double sum = 0;
  for (std::size_t p = 0; p < c.size(); ++p) {
    for (std::size_t q = p + 1; q < c.size(); ++q) sum += graph.weight(c[p], c[q]);
  }
  const double pairs = 0.5 * static_cast<double>(c.size()) * static_cast<double>(c.size() - 1);
  return sum / pairs;
}

double ris(const SparseGraph& graph, const VertexSet& ci, const VertexSet& cj) {
  if (ci.empty() || cj.empty()) throw PreconditionError("RIS needs nonempty clusters");
  const double inter = inter_similarity(graph, ci, cj);
  const double ni = static_cast<double>(ci.size());
  const double nj = static_cast<double>(cj.size());
  const double intra =
      (ni * intra_similarity(graph, ci) + nj * intra_similarity(graph, cj)) / (ni + nj);
  if (intra == 0.0) return inter > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return inter / intra;
}

}  // namespace cipca
