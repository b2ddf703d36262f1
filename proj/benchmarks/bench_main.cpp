#include <benchmark/benchmark.h>

#include <random>

#include "cipca/bayes.hpp"
#include "cipca/clustering.hpp"
#include "cipca/factor_model.hpp"
#include "cipca/similarity.hpp"
#include "cipca/synthetic.hpp"

namespace {

cipca::SyntheticPanel panel_for(std::size_t N, std::size_t T, std::size_t I, int K) {
  cipca::SyntheticConfig c;
  c.N = N;
  c.T = T;
  c.I = I;
  c.K = K;
  c.seed = 11;
  return cipca::make_synthetic_panel(c);
}

void BM_AlsFit(benchmark::State& state) {
  const auto sp = panel_for(static_cast<std::size_t>(state.range(0)), 120, 12, 3);
  const auto w = cipca::build_weights(sp.panel, cipca::WeightScheme::kValue);
  const auto data = cipca::make_estimation_panel(sp.panel, cipca::standardize(sp.panel), w);
  for (auto _ : state) {
    auto model = cipca::fit(data, sp.mask);
    benchmark::DoNotOptimize(model.Gamma.data());
  }
}
BENCHMARK(BM_AlsFit)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Similarity(benchmark::State& state) {
  const auto I = static_cast<std::size_t>(state.range(0));
  const auto sp = panel_for(200, 120, I, 4);
  const auto ranks = cipca::rank_transform(sp.panel);
  const auto w = cipca::build_weights(sp.panel, cipca::WeightScheme::kValue);
  for (auto _ : state) {
    auto S = cipca::similarity_matrix(ranks, w, sp.panel.char_names);
    benchmark::DoNotOptimize(S.S.data());
  }
}
BENCHMARK(BM_Similarity)->Arg(12)->Arg(36)->Unit(benchmark::kMillisecond);

void BM_Clustering(benchmark::State& state) {
  const auto I = static_cast<std::size_t>(state.range(0));
  const auto sp = panel_for(200, 60, I, 4);
  const auto S = cipca::similarity_matrix(cipca::rank_transform(sp.panel),
                                          cipca::build_weights(sp.panel, cipca::WeightScheme::kValue),
                                          sp.panel.char_names);
  const auto prior = cipca::Partition::single(I);
  for (auto _ : state) {
    auto r = cipca::cluster_characteristics(S, prior, 5, 8, false);
    benchmark::DoNotOptimize(r.partition.K);
  }
}
BENCHMARK(BM_Clustering)->Arg(24)->Arg(72)->Unit(benchmark::kMicrosecond);

void BM_BayesEnumeration(benchmark::State& state) {
  const auto J = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.005, 0.02);
  Eigen::MatrixXd F(600, J);
  for (Eigen::Index i = 0; i < F.size(); ++i) F.data()[i] = n(rng);
  for (auto _ : state) {
    auto r = cipca::posterior_rank(F);
    benchmark::DoNotOptimize(r.ranked.data());
  }
}
BENCHMARK(BM_BayesEnumeration)->Arg(5)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
