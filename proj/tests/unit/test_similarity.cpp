#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cipca/error.hpp"
#include "cipca/similarity.hpp"
#include "support.hpp"

using namespace cipca;
using testing_support::panel_of;

namespace {
Eigen::MatrixXd cols(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}
}  // namespace

TEST(RankCorrelation, SelfIsOne) {
  const auto p = panel_of({cols({{1, 5}, {2, 3}, {3, 4}, {4, 1}})});
  const auto R = rank_transform(p);
  const auto w = build_weights(p, WeightScheme::kValue);
  EXPECT_EQ(rank_correlation(R, 0, 0, w), 1.0);
  EXPECT_EQ(rank_correlation(R, 1, 1, w), 1.0);
}

TEST(RankCorrelation, ReversedIsMinusOne) {
  const auto p = panel_of({cols({{1, 4}, {2, 3}, {3, 2}, {4, 1}}), cols({{0.5, 9}, {0.1, 10}, {0.2, 11}, {0.3, 8}})});
  // Second month: second column is not a reversal; make it one.
  auto q = p;
  q.months[1].X.col(1) = -q.months[1].X.col(0);
  const auto R = rank_transform(q);
  const auto w = build_weights(q, WeightScheme::kEqual);
  EXPECT_NEAR(rank_correlation(R, 0, 1, w), -1.0, 1e-15);
}

TEST(RankCorrelation, HandComputedHalf) {
  const auto p = panel_of({cols({{1, 1}, {2, 3}, {3, 2}})});
  EXPECT_NEAR(rank_correlation(rank_transform(p), 0, 1, build_weights(p, WeightScheme::kEqual)), 0.5, 1e-15);
}

TEST(RankCorrelation, ZeroVarianceEverywhereIsUndefined) {
  // Second column is tied in every month, so its ranks never vary.
  const auto p = panel_of({cols({{1, 1}, {2, 1}, {3, 1}}), cols({{3, 7}, {2, 7}, {1, 7}})});
  EXPECT_THROW(rank_correlation(rank_transform(p), 0, 1, build_weights(p, WeightScheme::kValue)),
               UndefinedCorrelationError);
}

TEST(RankCorrelation, SkipsMonthsWhereColumnMissing) {
  const double nan = std::nan("");
  const auto p = panel_of({cols({{1, 1}, {2, 3}, {3, 2}}), cols({{1, nan}, {2, nan}, {3, nan}})});
  EXPECT_NEAR(rank_correlation(rank_transform(p), 0, 1, build_weights(p, WeightScheme::kEqual)), 0.5, 1e-15);
}

TEST(SimilarityFromCorrelation, KnownValues) {
  EXPECT_EQ(similarity_from_correlation(1.0), 1.0);
  EXPECT_NEAR(similarity_from_correlation(0.0), 0.36788, 1e-5);
  EXPECT_NEAR(similarity_from_correlation(-0.87), 0.87810, 1e-5);
}

TEST(ToDistance, KnownValuesAndRoundTrip) {
  SimilarityMatrix S;
  S.names = {"a", "b", "c"};
  S.S.resize(3, 3);
  S.S << 1, std::exp(-1.0), 0.5, std::exp(-1.0), 1, 0.7, 0.5, 0.7, 1;
  S.rho = Eigen::MatrixXd::Identity(3, 3);
  const auto D = to_distance(S);
  EXPECT_EQ(D.D(0, 0), 0.0);
  EXPECT_NEAR(D.D(0, 1), std::numbers::e - 1, 1e-12);
  EXPECT_NEAR(D.D(0, 2), 1.0, 1e-15);
  EXPECT_LT((similarity_from_distance(D.D) - S.S).cwiseAbs().maxCoeff(), 1e-12);
  // Order reversal.
  EXPECT_LT(D.D(1, 2), D.D(0, 2));
  S.S(0, 1) = S.S(1, 0) = 0.0;
  EXPECT_THROW(to_distance(S), DomainError);
}

namespace {
CharacteristicPanel random_panel(std::mt19937_64& rng, std::size_t months, Eigen::Index n, Eigen::Index I) {
  std::normal_distribution<double> g;
  std::vector<Eigen::MatrixXd> X;
  for (std::size_t t = 0; t < months; ++t) {
    Eigen::MatrixXd x(n, I);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double common = g(rng);
      for (Eigen::Index c = 0; c < I; ++c) x(i, c) = common * (c % 3) + g(rng);
    }
    X.push_back(x);
  }
  auto p = panel_of(X);
  std::uniform_real_distribution<double> u(1, 100);
  for (auto& m : p.months)
    for (Eigen::Index i = 0; i < n; ++i) m.mktcap(i) = u(rng);
  return p;
}
}  // namespace

TEST(SimilarityMatrix, RangeSymmetryAndUnitDiagonal) {
  std::mt19937_64 rng(4);
  const auto p = random_panel(rng, 6, 40, 7);
  const auto S = similarity_matrix(rank_transform(p), build_weights(p, WeightScheme::kValue), p.char_names);
  EXPECT_EQ(S.S, S.S.transpose());
  EXPECT_EQ(S.rho, S.rho.transpose());
  for (Eigen::Index i = 0; i < 7; ++i) EXPECT_EQ(S.S(i, i), 1.0);
  EXPECT_GE(S.S.minCoeff(), std::exp(-1.0));
  EXPECT_LE(S.S.maxCoeff(), 1.0);
  EXPECT_LE(S.rho.cwiseAbs().maxCoeff(), 1.0 + 1e-15);
  for (Eigen::Index i = 0; i < 7; ++i)
    for (Eigen::Index j = 0; j < 7; ++j) EXPECT_DOUBLE_EQ(S.S(i, j), std::exp(-(1 - std::abs(S.rho(i, j)))));
  const auto D = to_distance(S);
  EXPECT_GE(D.D.minCoeff(), 0.0);
  EXPECT_LE(D.D.maxCoeff(), std::numbers::e - 1 + 1e-12);
}

TEST(SimilarityMatrix, SignAndMonotoneInvariance) {
  std::mt19937_64 rng(8);
  const auto p = random_panel(rng, 5, 35, 5);
  const auto w = build_weights(p, WeightScheme::kValue);
  const auto base = similarity_matrix(rank_transform(p), w, p.char_names);
  auto neg = p;
  for (auto& m : neg.months) m.X.col(2) = -m.X.col(2);
  EXPECT_LT((similarity_matrix(rank_transform(neg), w, p.char_names).S - base.S).cwiseAbs().maxCoeff(), 1e-15);
  auto mono = p;
  for (auto& m : mono.months) m.X.col(1) = m.X.col(1).array().exp() * 2 + 1;
  EXPECT_EQ(similarity_matrix(rank_transform(mono), w, p.char_names).S, base.S);
}

TEST(SimilarityMatrix, JobsDoNotChangeBits) {
  std::mt19937_64 rng(12);
  const auto p = random_panel(rng, 4, 30, 9);
  const auto R = rank_transform(p);
  const auto w = build_weights(p, WeightScheme::kValue);
  const auto a = similarity_matrix(R, w, p.char_names, {}, 1);
  const auto b = similarity_matrix(R, w, p.char_names, {}, 4);
  EXPECT_EQ(a.S, b.S);
  EXPECT_EQ(a.rho, b.rho);
}

TEST(SimilarityMatrix, WindowRestrictsMonths) {
  std::mt19937_64 rng(3);
  const auto p = random_panel(rng, 6, 30, 3);
  const auto R = rank_transform(p);
  const auto w = build_weights(p, WeightScheme::kValue);
  const auto head = similarity_matrix(R, w, p.char_names, MonthWindow{0, 3});
  const auto sliced = p.slice(0, 3);
  const auto ref = similarity_matrix(rank_transform(sliced), build_weights(sliced, WeightScheme::kValue), p.char_names);
  EXPECT_LT((head.rho - ref.rho).cwiseAbs().maxCoeff(), 1e-15);
}
