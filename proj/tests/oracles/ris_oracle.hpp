#pragma once

// Exhaustive reference for relative inter-cluster similarity, greedy merging
// and the K-selection rule. Works on a dense weight matrix (0 = no edge).
// Arithmetic convention shared with the library so values compare exactly:
// inter sums run over the set holding the smaller vertex first, and the
// intra term is the size-weighted mean (na Ia + nb Ib) / (na + nb).

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace oracle {

using Set = std::vector<std::size_t>;

inline double inter(const Eigen::MatrixXd& W, const Set& first, const Set& second) {
  const bool swap = second.front() < first.front();
  const Set& a = swap ? second : first;
  const Set& b = swap ? first : second;
  double s = 0;
  for (auto i : a)
    for (auto j : b) s += W(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return s / static_cast<double>(a.size() * b.size());
}

inline double intra(const Eigen::MatrixXd& W, const Set& c) {
  if (c.size() < 2) return 0;
  double s = 0;
  std::size_t pairs = 0;
  for (std::size_t x = 0; x < c.size(); ++x)
    for (std::size_t y = x + 1; y < c.size(); ++y, ++pairs)
      s += W(static_cast<Eigen::Index>(c[x]), static_cast<Eigen::Index>(c[y]));
  return s / static_cast<double>(pairs);
}

inline double ris(const Eigen::MatrixXd& W, const Set& a, const Set& b) {
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double den = (na * intra(W, a) + nb * intra(W, b)) / (na + nb);
  const double num = inter(W, a, b);
  if (den == 0) return num > 0 ? std::numeric_limits<double>::infinity() : 0.0;
  return num / den;
}

struct Step {
  int a = 0;
  int b = 0;
  double max_ris = 0;
  int k = 0;
};

// Every step scores all live pairs, then takes the lexicographically smallest
// pair among those attaining the maximum.
inline std::vector<Step> greedy_trace(const Eigen::MatrixXd& W, std::vector<Set> clusters) {
  const int m = static_cast<int>(clusters.size());
  std::vector<bool> live(clusters.size(), true);
  std::vector<Step> out;
  for (int k = m; k > 1; --k) {
    std::vector<std::pair<std::pair<int, int>, double>> scored;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        if (a < b && live[static_cast<std::size_t>(a)] && live[static_cast<std::size_t>(b)])
          scored.push_back({{a, b}, ris(W, clusters[static_cast<std::size_t>(a)], clusters[static_cast<std::size_t>(b)])});
    double best = -1;
    for (const auto& s : scored) best = std::max(best, s.second);
    std::pair<int, int> pick{m, m};
    for (const auto& s : scored)
      if (s.second == best) pick = std::min(pick, s.first);
    auto& into = clusters[static_cast<std::size_t>(pick.first)];
    auto& from = clusters[static_cast<std::size_t>(pick.second)];
    into.insert(into.end(), from.begin(), from.end());
    std::sort(into.begin(), into.end());
    from.clear();
    live[static_cast<std::size_t>(pick.second)] = false;
    out.push_back({pick.first, pick.second, best, k - 1});
  }
  return out;
}

// Walk of the stopping rule. max_ris[K] is Max_RIS of the merge ending at K
// clusters, for K = 1..m-1 (index 0 unused).
inline int select_k(const std::vector<double>& max_ris, int m, double f, double eta) {
  if (m == 1) return 1;
  auto inv = [](double v) {
    if (v == 0) return std::numeric_limits<double>::infinity();
    return 1.0 / v;
  };
  const int half = m / 2;
  double base = 0;
  for (int K = half; K < m; ++K) base += inv(max_ris[static_cast<std::size_t>(K)]);
  base /= static_cast<double>(m - half);
  for (int i = 0; i <= 64; ++i) {
    double thr = f;
    for (int r = 0; r < i; ++r) thr /= eta;
    thr *= base;
    for (int K = half - 1; K >= 1; --K)
      if (inv(max_ris[static_cast<std::size_t>(K)]) >= thr) return K + 1;
  }
  return std::max(1, half - 1);
}

}  // namespace oracle
