#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "../oracles/bisection_oracle.hpp"
#include "../oracles/ris_oracle.hpp"
#include "cipca/clustering.hpp"
#include "cipca/error.hpp"
#include "cipca/hyperparams.hpp"
#include "cipca/synthetic.hpp"
#include "support.hpp"

using namespace cipca;

namespace {

SparseGraph complete_graph(const Eigen::MatrixXd& W) {
  SparseGraph g(static_cast<std::size_t>(W.rows()));
  for (Eigen::Index i = 0; i < W.rows(); ++i)
    for (Eigen::Index j = i + 1; j < W.cols(); ++j)
      if (W(i, j) > 0) g.add_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j), W(i, j));
  return g;
}

bool is_partition(const Partition& p, std::size_t n) {
  if (p.size() != n) return false;
  std::vector<int> count(static_cast<std::size_t>(p.K), 0);
  for (int a : p.assignment) {
    if (a < 0 || a >= p.K) return false;
    ++count[static_cast<std::size_t>(a)];
  }
  return std::all_of(count.begin(), count.end(), [](int c) { return c > 0; });
}

}  // namespace

TEST(KnnSparsify, LargeKnnKeepsEverything) {
  std::mt19937_64 rng(1);
  const auto S = testing_support::random_similarity(5, rng);
  EXPECT_EQ(knn_sparsify(S, 4).edge_count(), 10u);
}

TEST(KnnSparsify, UnionSymmetrization) {
  Eigen::Matrix3d S;
  S << 1, 0.9, 0.8, 0.9, 1, 0.5, 0.8, 0.5, 1;
  const auto g = knn_sparsify(Eigen::MatrixXd(S), 1);
  using E = std::pair<std::size_t, std::size_t>;
  EXPECT_EQ(g.edges(), (std::vector<E>{{0, 1}, {0, 2}}));
  EXPECT_EQ(g.weight(0, 2), 0.8);
  EXPECT_FALSE(g.has_edge(1, 2));
}

TEST(KnnSparsify, ZeroKnnRejected) {
  EXPECT_THROW(knn_sparsify(Eigen::MatrixXd(Eigen::MatrixXd::Identity(3, 3)), 0), PreconditionError);
}

TEST(KnnSparsify, NoSelfLoopsAndWeightsFromSource) {
  std::mt19937_64 rng(2);
  const auto S = testing_support::random_similarity(9, rng);
  const auto g = knn_sparsify(S, 3);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_FALSE(g.has_edge(i, i));
  for (auto [i, j] : g.edges()) EXPECT_EQ(g.weight(i, j), S(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  // Every vertex keeps at least its own 3 neighbors.
  for (std::size_t i = 0; i < 9; ++i) {
    int deg = 0;
    for (std::size_t j = 0; j < 9; ++j) deg += g.has_edge(i, j);
    EXPECT_GE(deg, 3);
  }
}

TEST(SplitSubclusters, PriorCountEqualsM) {
  std::mt19937_64 rng(3);
  const auto g = knn_sparsify(testing_support::random_similarity(6, rng), 5);
  const Partition prior = Partition::from_clusters({{0, 1, 2, 3}, {4, 5}}, 6);
  const auto subs = split_subclusters(g, prior, 2, true);
  EXPECT_EQ(subs, (std::vector<VertexSet>{{0, 1, 2, 3}, {4, 5}}));
}

TEST(SplitSubclusters, PlantedBlocksMatchExhaustiveBisection) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(8, 8, 0.4);
  const std::vector<std::size_t> blockA = {0, 2, 5, 7};
  for (auto i : blockA)
    for (auto j : blockA) W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.9;
  for (std::size_t i : {1, 3, 4, 6})
    for (std::size_t j : {1, 3, 4, 6}) W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 0.9;
  W.diagonal().setOnes();
  const auto g = knn_sparsify(W, 7);
  const auto subs = split_subclusters(g, Partition::single(8), 2, false);
  EXPECT_EQ(subs, (std::vector<VertexSet>{{0, 2, 5, 7}, {1, 3, 4, 6}}));
  Eigen::MatrixXd off = W;
  off.diagonal().setZero();
  const auto best = oracle::best_bisection(off);
  EXPECT_EQ(subs[0], best.a);
  EXPECT_EQ(subs[1], best.b);
}

TEST(SplitSubclusters, SpectralMatchesBruteForceOnNoisyBlocks) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 6 + rep % 5;
    std::vector<int> side(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) side[static_cast<std::size_t>(i)] = (i * 7 + rep) % 2;
    Eigen::MatrixXd W(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        const double base = side[static_cast<std::size_t>(i)] == side[static_cast<std::size_t>(j)] ? 0.85 : 0.45;
        W(i, j) = W(j, i) = i == j ? 1.0 : base + noise(rng);
      }
    const auto g = knn_sparsify(W, n - 1);
    VertexSet all(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    const auto [a, b] = spectral_bisect(g, all);
    Eigen::MatrixXd off = W;
    off.diagonal().setZero();
    const auto best = oracle::best_bisection(off);
    EXPECT_EQ(a, best.a) << "rep " << rep;
    EXPECT_EQ(b, best.b) << "rep " << rep;
  }
}

TEST(SplitSubclusters, MEqualsIGivesSingletons) {
  std::mt19937_64 rng(5);
  const auto g = knn_sparsify(testing_support::random_similarity(7, rng), 3);
  const auto subs = split_subclusters(g, Partition::single(7), 7, false);
  ASSERT_EQ(subs.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(subs[i], VertexSet{i});
  EXPECT_THROW(split_subclusters(g, Partition::single(7), 8, false), Error);
}

TEST(SplitSubclusters, ConstrainedStayInsidePrior) {
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 10; ++rep) {
    const auto g = knn_sparsify(testing_support::random_similarity(12, rng), 4);
    const Partition prior = random_partition(12, 3, static_cast<std::uint64_t>(rep));
    const auto subs = split_subclusters(g, prior, 7, true);
    ASSERT_EQ(subs.size(), 7u);
    for (const auto& s : subs) {
      std::set<int> owners;
      for (auto v : s) owners.insert(prior.assignment[v]);
      EXPECT_EQ(owners.size(), 1u);
    }
    EXPECT_TRUE(is_partition(Partition::from_clusters(subs, 12), 12));
  }
}

TEST(Ris, SymmetricSetupIsOne) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(4, 4, 0.5);
  W.diagonal().setZero();
  EXPECT_DOUBLE_EQ(ris(complete_graph(W), {0, 1}, {2, 3}), 1.0);
}

TEST(Ris, HandExample) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(4, 4, 0.3);
  W.diagonal().setZero();
  W(0, 1) = W(1, 0) = 0.8;
  W(2, 3) = W(3, 2) = 0.4;
  EXPECT_NEAR(ris(complete_graph(W), {0, 1}, {2, 3}), 0.5, 1e-15);
}

TEST(Ris, SymmetricOnRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const auto g = knn_sparsify(testing_support::random_similarity(10, rng), 3);
    const VertexSet a = {0, 3, 4}, b = {1, 2, 7, 9};
    EXPECT_EQ(ris(g, a, b), ris(g, b, a));
  }
}

TEST(Ris, SingletonConvention) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(3, 3);
  W(0, 1) = W(1, 0) = 0.6;
  const auto g = complete_graph(W);
  EXPECT_EQ(ris(g, {0}, {1}), std::numeric_limits<double>::infinity());
  EXPECT_EQ(ris(g, {0}, {2}), 0.0);
  EXPECT_THROW(ris(g, {}, {1}), PreconditionError);
}

TEST(MergeRis, NoMergesAndFullMerge) {
  std::mt19937_64 rng(8);
  const auto g = knn_sparsify(testing_support::random_similarity(6, rng), 2);
  const std::vector<VertexSet> subs = {{0, 1}, {2}, {3, 4}, {5}};
  const auto [p4, t4] = merge_ris(subs, g, 4);
  EXPECT_EQ(p4.K, 4);
  EXPECT_TRUE(t4.steps.empty());
  const auto [p1, t1] = merge_ris(subs, g, 1);
  EXPECT_EQ(p1.K, 1);
  ASSERT_EQ(t1.steps.size(), 3u);
  for (std::size_t s = 0; s < 3; ++s) EXPECT_EQ(t1.steps[s].resulting_k, 3 - static_cast<int>(s));
}

TEST(MergeRis, DominantPairMergedFirst) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Constant(8, 8, 0.2);
  W.diagonal().setZero();
  for (int i = 0; i < 8; i += 2) W(i, i + 1) = W(i + 1, i) = 0.8;
  // Sub-clusters 1 and 2 ({2,3} and {4,5}) are tightly tied.
  for (int i : {2, 3})
    for (int j : {4, 5}) W(i, j) = W(j, i) = 0.7;
  const auto g = complete_graph(W);
  const std::vector<VertexSet> subs = {{0, 1}, {2, 3}, {4, 5}, {6, 7}};
  const auto trace = merge_ris(subs, g, 1).second;
  EXPECT_EQ(trace.steps[0].cluster_a, 1);
  EXPECT_EQ(trace.steps[0].cluster_b, 2);
  const auto ref = oracle::greedy_trace(W, subs);
  EXPECT_EQ(ref[0].a, 1);
  EXPECT_EQ(ref[0].b, 2);
}

TEST(MergeRis, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 4 + static_cast<std::size_t>(rep % 9);
    const auto S = testing_support::random_similarity(n, rng);
    const auto g = knn_sparsify(S, 1 + rep % 3);
    const int m = 2 + rep % static_cast<int>(n - 1);
    const auto subs = split_subclusters(g, Partition::single(n), m, false);
    const auto trace = merge_ris(subs, g, 1).second;
    const auto ref = oracle::greedy_trace(g.weights(), subs);
    ASSERT_EQ(trace.steps.size(), ref.size());
    for (std::size_t s = 0; s < ref.size(); ++s) {
      EXPECT_EQ(trace.steps[s].cluster_a, ref[s].a);
      EXPECT_EQ(trace.steps[s].cluster_b, ref[s].b);
      EXPECT_EQ(trace.steps[s].max_ris, ref[s].max_ris);
    }
  }
}

namespace {
MergeTrace synthetic_trace(int m, const std::function<double(int)>& max_ris_at) {
  MergeTrace t;
  for (int i = 0; i < m; ++i) t.basic_subclusters.push_back({static_cast<std::size_t>(i)});
  for (int K = m - 1; K >= 1; --K) t.steps.push_back({0, m - K, max_ris_at(K), K});
  return t;
}
}  // namespace

TEST(SelectK, SharpDrop) {
  const auto t = synthetic_trace(16, [](int K) { return K >= 5 ? 0.5 : 1e-6; });
  const auto r = select_K(t, 16, 1e3, 1.3);
  EXPECT_EQ(r.K, 5);
  EXPECT_EQ(r.relaxations, 0);
}

TEST(SelectK, FlatTraceRelaxes) {
  const auto t = synthetic_trace(16, [](int) { return 0.5; });
  const auto r = select_K(t, 16, 1e3, 1.3);
  // Triggers at K = m/2 - 1 once f / eta^i <= 1; the rule then returns the K above it.
  EXPECT_EQ(r.K, 16 / 2);
  EXPECT_EQ(r.relaxations, static_cast<int>(std::ceil(std::log(1e3) / std::log(1.3))));
  EXPECT_FALSE(r.capped);
}

TEST(SelectK, MatchesOracleOnRandomTraces) {
  std::mt19937_64 rng(10);
  std::lognormal_distribution<double> ln(0, 3);
  for (int rep = 0; rep < 200; ++rep) {
    const int m = 2 + rep % 15;
    std::vector<double> v(static_cast<std::size_t>(m));
    for (int K = 1; K < m; ++K) v[static_cast<std::size_t>(K)] = rep % 7 == 0 && K == 1 ? 0.0 : ln(rng);
    const auto t = synthetic_trace(m, [&](int K) { return v[static_cast<std::size_t>(K)]; });
    EXPECT_EQ(select_K(t, m, 1e3, 1.3).K, oracle::select_k(v, m, 1e3, 1.3)) << "rep " << rep;
  }
}

TEST(SelectK, Deterministic) {
  const auto t = synthetic_trace(10, [](int K) { return 1.0 / (1 + K * K); });
  EXPECT_EQ(select_K(t, 10, 50, 1.5).K, select_K(t, 10, 50, 1.5).K);
}

TEST(RandomPartition, EdgeCasesAndDeterminism) {
  const auto all = random_partition(5, 5, 1);
  EXPECT_EQ(all.K, 5);
  EXPECT_TRUE(is_partition(all, 5));
  const auto one = random_partition(5, 1, 1);
  EXPECT_EQ(one.assignment, std::vector<int>(5, 0));
  EXPECT_EQ(random_partition(94, 12, 3).assignment, random_partition(94, 12, 3).assignment);
  EXPECT_NE(random_partition(94, 12, 3).assignment, random_partition(94, 12, 4).assignment);
  EXPECT_THROW(random_partition(4, 5, 1), PreconditionError);
  for (std::uint64_t s = 0; s < 50; ++s) EXPECT_TRUE(is_partition(random_partition(20, 7, s), 20));
}

TEST(PartitionType, ValidateAndCanonical) {
  Partition p;
  p.assignment = {2, 0, 2, 1};
  p.K = 3;
  p.labels = {"c", "a", "b"};
  const auto c = p.canonical();
  EXPECT_EQ(c.assignment, (std::vector<int>{0, 1, 0, 2}));
  EXPECT_EQ(c.labels, (std::vector<std::string>{"b", "c", "a"}));
  Partition bad;
  bad.assignment = {0, 0, 2};
  bad.K = 3;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(AdjustedRand, IdenticalAndRelabelled) {
  const auto a = Partition::from_clusters({{0, 1, 2}, {3, 4}, {5}}, 6);
  const auto b = Partition::from_clusters({{5}, {3, 4}, {0, 1, 2}}, 6);
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, b), 1.0);
  EXPECT_LT(adjusted_rand_index(a, Partition::from_clusters({{0, 3}, {1, 4}, {2, 5}}, 6)), 0.5);
}

TEST(ClusterCharacteristics, ConstrainedRefinesPrior) {
  std::mt19937_64 rng(11);
  const auto S = testing_support::random_similarity(12, rng);
  SimilarityMatrix sm;
  sm.S = S;
  sm.rho = S;
  for (int i = 0; i < 12; ++i) sm.names.push_back("c" + std::to_string(i));
  const auto prior = random_partition(12, 3, 2);
  const auto r = cluster_characteristics(sm, prior, 4, 6, true);
  EXPECT_TRUE(is_partition(r.partition, 12));
  for (const auto& sub : r.trace.basic_subclusters) {
    std::set<int> owners;
    for (auto v : sub) owners.insert(prior.assignment[v]);
    EXPECT_EQ(owners.size(), 1u);
  }
  // Each final cluster is a union of basic sub-clusters.
  for (const auto& sub : r.trace.basic_subclusters) {
    std::set<int> owners;
    for (auto v : sub) owners.insert(r.partition.assignment[v]);
    EXPECT_EQ(owners.size(), 1u);
  }
  EXPECT_THROW(cluster_characteristics(sm, prior, 4, 2, true), Error);
}

TEST(GridSearch, SingleCellAndTieBreak) {
  SyntheticConfig c;
  c.N = 60;
  c.T = 48;
  c.I = 6;
  c.K = 2;
  c.seed = 3;
  const auto sp = make_synthetic_panel(c);
  const auto w = build_weights(sp.panel, WeightScheme::kValue);
  const auto data = make_estimation_panel(sp.panel, standardize(sp.panel), w);
  const auto S = similarity_matrix(rank_transform(sp.panel), w, sp.panel.char_names);
  GridOptions o;
  o.tangency.burn_in = 12;
  const auto single = grid_search(data, S, sp.truth, GridSpec{{3}, {4}}, o);
  ASSERT_EQ(single.cells.size(), 1u);
  EXPECT_EQ(single.best.knn, 3);
  EXPECT_EQ(single.best.m, 4);

  const auto grid = grid_search(data, S, sp.truth, GridSpec{{5, 2, 3}, {4, 2}}, o);
  ASSERT_EQ(grid.cells.size(), 6u);
  for (std::size_t i = 1; i < grid.cells.size(); ++i) {
    const auto& a = grid.cells[i - 1];
    const auto& b = grid.cells[i];
    EXPECT_TRUE(a.m < b.m || (a.m == b.m && a.knn < b.knn));
  }
  const GridCell* best = nullptr;
  for (const auto& cell : grid.cells)
    if (!best || cell.sharpe > best->sharpe) best = &cell;
  EXPECT_EQ(grid.best.m, best->m);
  EXPECT_EQ(grid.best.knn, best->knn);
  // The winning score is the objective evaluated on its own partition.
  const auto mask = restriction_mask_from_partition(grid.clustering.partition, true);
  EXPECT_DOUBLE_EQ(training_sharpe(data, mask, o), best->sharpe);
  // Jobs do not change the outcome.
  o.jobs = 3;
  const auto par = grid_search(data, S, sp.truth, GridSpec{{5, 2, 3}, {4, 2}}, o);
  for (std::size_t i = 0; i < grid.cells.size(); ++i) EXPECT_EQ(par.cells[i].sharpe, grid.cells[i].sharpe);
}
