#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cipca/similarity.hpp"

namespace cipca {

using VertexSet = std::vector<std::size_t>;

// Undirected weighted graph over characteristics. Dense storage: I is small.
class SparseGraph {
 public:
  SparseGraph() = default;
  explicit SparseGraph(std::size_t n);

  std::size_t size() const { return n_; }
  void add_edge(std::size_t i, std::size_t j, double weight);
  bool has_edge(std::size_t i, std::size_t j) const { return adj_(idx(i), idx(j)); }
  // Zero when the edge is absent.
  double weight(std::size_t i, std::size_t j) const { return w_(idx(i), idx(j)); }
  const Eigen::MatrixXd& weights() const { return w_; }
  std::size_t edge_count() const;
  // Edges (i < j) in lexicographic order.
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }
  std::size_t n_ = 0;
  Eigen::MatrixXd w_;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> adj_;
};

// Cluster assignment of I characteristics. Canonical form numbers clusters
// 0..K-1 in order of their smallest member.
struct Partition {
  std::vector<int> assignment;
  int K = 0;
  std::vector<std::string> labels;  // optional, one per cluster

  static Partition from_clusters(const std::vector<VertexSet>& clusters, std::size_t n);
  static Partition single(std::size_t n);
  std::vector<VertexSet> clusters() const;
  std::size_t size() const { return assignment.size(); }
  // Throws ValidationError unless clusters are nonempty, disjoint and covering.
  void validate() const;
  // Renumbers to canonical order, permuting labels along.
  Partition canonical() const;
};

double adjusted_rand_index(const Partition& a, const Partition& b);

struct MergeStep {
  int cluster_a = 0;  // surviving id (the smaller)
  int cluster_b = 0;  // absorbed id
  double max_ris = 0;
  int resulting_k = 0;
};

struct MergeTrace {
  std::vector<VertexSet> basic_subclusters;
  std::vector<MergeStep> steps;
};

struct HyperParams {
  int knn = 0;
  int m = 0;
  int K = 0;
  double f = 1e3;
  double eta = 1.3;

  void validate(std::size_t num_characteristics) const;
};

// Keeps edge (i, j) when j is among i's knn most similar characteristics or
// i among j's. Ties in similarity go to the lower index.
SparseGraph knn_sparsify(const SimilarityMatrix& S, int knn);
SparseGraph knn_sparsify(const Eigen::MatrixXd& S, int knn);

// Normalized-Laplacian spectral bisection of the subgraph induced by `vertices`.
// Returns the two sides, each sorted; the first side holds the smallest vertex.
std::pair<VertexSet, VertexSet> spectral_bisect(const SparseGraph& graph, const VertexSet& vertices);

// Repeatedly bisects the largest live sub-cluster until m exist. Constrained mode
// starts from `prior`; unconstrained mode starts from one all-vertex cluster.
// Output is sorted by smallest member.
std::vector<VertexSet> split_subclusters(const SparseGraph& graph, const Partition& prior, int m,
                                         bool constrained);

// Average edge weight between two sets (absent edges count as 0).
double inter_similarity(const SparseGraph& graph, const VertexSet& a, const VertexSet& b);
// Average edge weight over all vertex pairs within a set; 0 for singletons.
double intra_similarity(const SparseGraph& graph, const VertexSet& c);

// Relative inter-cluster similarity. When both INTRA terms are zero the value is
// +inf if INTER > 0 and 0 otherwise.
double ris(const SparseGraph& graph, const VertexSet& ci, const VertexSet& cj);

// Greedy max-RIS merging of the sub-clusters (ids = positions in `subclusters`)
// until K_target remain. Ties go to the lexicographically lowest (id, id) pair.
std::pair<Partition, MergeTrace> merge_ris(const std::vector<VertexSet>& subclusters,
                                           const SparseGraph& graph, int K_target);

// Replays the first (m - K) steps of a full trace.
Partition partition_at(const MergeTrace& trace, std::size_t num_vertices, int K);

struct SelectKResult {
  int K = 0;
  int relaxations = 0;  // i in f / eta^i at which the rule fired
  bool capped = false;  // fell back after kMaxRelaxations
};

inline constexpr int kMaxRelaxations = 64;

// Stop-merging rule on the Max_RIS drop. The trace must run from m down to 1.
SelectKResult select_K(const MergeTrace& trace, int m, double f, double eta);

// Uniformly random assignment of I items to K nonempty clusters.
Partition random_partition(std::size_t I, int K, std::uint64_t seed);

// Full split/merge pipeline for fixed (knn, m): returns the K*-cluster partition
// and the full merge trace (K from m down to 1).
struct ClusteringResult {
  Partition partition;
  MergeTrace trace;
  SelectKResult selection;
};

ClusteringResult cluster_characteristics(const SimilarityMatrix& S, const Partition& prior,
                                         int knn, int m, bool constrained, double f = 1e3,
                                         double eta = 1.3, int K_max = 0);

}  // namespace cipca
