#include "cipca/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "cipca/error.hpp"

namespace cipca {

int add_months(int yyyymm, int months) {
  const int index = (yyyymm / 100) * 12 + (yyyymm % 100 - 1) + months;
  return (index / 12) * 100 + index % 12 + 1;
}

namespace {

std::string asset_id(std::size_t n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "A%06zu", n);
  return buf;
}

}  // namespace

SyntheticPanel make_synthetic_panel(const SyntheticConfig& c) {
  if (c.K < 1 || static_cast<std::size_t>(c.K) > c.I) throw PreconditionError("need 1 <= K <= I");
  if (c.N < 2 || c.T < 2) throw PreconditionError("need N >= 2 and T >= 2");
  if (!(c.intra_corr >= c.inter_corr && c.inter_corr >= 0 && c.intra_corr <= 1)) {
    throw PreconditionError("need 0 <= inter_corr <= intra_corr <= 1");
  }
  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  const std::size_t I = c.I;
  const auto K = static_cast<std::size_t>(c.K);
  SyntheticPanel out;

  // Contiguous blocks of near-equal size.
  std::vector<VertexSet> blocks(K);
  for (std::size_t i = 0; i < I; ++i) blocks[i * K / I].push_back(i);
  out.truth = Partition::from_clusters(blocks, I);
  out.mask = restriction_mask_from_partition(out.truth, c.zc);
  const Eigen::Index L = static_cast<Eigen::Index>(I + 1);
  const Eigen::Index J = out.mask.free.cols();

  out.Gamma = Eigen::MatrixXd::Zero(L, J);
  for (std::size_t k = 0; k < K; ++k) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(blocks[k].size()));
    for (std::size_t i : blocks[k]) {
      const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
      out.Gamma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sign * scale * (0.5 + u(rng));
    }
  }
  if (c.zc) out.Gamma(L - 1, J - 1) = 1.0;

  out.factors.resize(static_cast<Eigen::Index>(c.T), J);
  for (std::size_t t = 0; t < c.T; ++t) {
    for (Eigen::Index j = 0; j < J; ++j) {
      const bool market = c.zc && j == J - 1;
      out.factors(static_cast<Eigen::Index>(t), j) =
          market ? c.market_mean + c.market_sd * z(rng) : c.factor_mean + c.factor_sd * z(rng);
    }
  }

  // Asset state: latent block/global drivers and idiosyncratic parts, AR(1).
  const double phi = c.persistence;
  const double innov = std::sqrt(1.0 - phi * phi);
  const double a_h = std::sqrt(c.inter_corr);
  const double a_g = std::sqrt(c.intra_corr - c.inter_corr);
  const double a_e = std::sqrt(1.0 - c.intra_corr);
  struct Asset {
    std::string id;
    double h = 0;
    std::vector<double> g, e;
    double log_cap = 0;
    double price = 0;
  };
  std::size_t next_id = 0;
  auto fresh = [&] {
    Asset a;
    a.id = asset_id(next_id++);
    a.h = z(rng);
    a.g.resize(K);
    a.e.resize(I);
    for (auto& v : a.g) v = z(rng);
    for (auto& v : a.e) v = z(rng);
    a.log_cap = 6.0 + 1.5 * z(rng);
    a.price = 2.0 + 60.0 * u(rng);
    return a;
  };
  std::vector<Asset> assets;
  for (std::size_t n = 0; n < c.N; ++n) assets.push_back(fresh());

  out.panel.char_names.resize(I);
  for (std::size_t i = 0; i < I; ++i) out.panel.char_names[i] = "c" + std::to_string(i + 1);
  std::vector<std::size_t> block_of(I);
  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t i : blocks[k]) block_of[i] = k;
  }

  for (std::size_t t = 0; t < c.T; ++t) {
    if (t > 0) {
      for (auto& a : assets) {
        a.h = phi * a.h + innov * z(rng);
        for (auto& v : a.g) v = phi * v + innov * z(rng);
        for (auto& v : a.e) v = phi * v + innov * z(rng);
        a.log_cap += 0.05 * z(rng);
        a.price *= std::exp(0.05 * z(rng));
      }
      for (auto& a : assets) {
        if (c.turnover > 0 && u(rng) < c.turnover) a = fresh();
      }
    }
    std::vector<std::size_t> order(assets.size());
    for (std::size_t n = 0; n < order.size(); ++n) order[n] = n;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return assets[x].id < assets[y].id; });
    MonthSlice m;
    m.date = add_months(c.start_date, static_cast<int>(t));
    const auto N = static_cast<Eigen::Index>(assets.size());
    m.X.resize(N, static_cast<Eigen::Index>(I));
    m.returns = Eigen::VectorXd::Zero(N);
    m.mktcap.resize(N);
    m.prices.resize(N);
    for (Eigen::Index r = 0; r < N; ++r) {
      const Asset& a = assets[order[static_cast<std::size_t>(r)]];
      m.assets.push_back(a.id);
      for (std::size_t i = 0; i < I; ++i) {
        m.X(r, static_cast<Eigen::Index>(i)) = a_h * a.h + a_g * a.g[block_of[i]] + a_e * a.e[i];
      }
      m.mktcap(r) = std::exp(a.log_cap);
      m.prices(r) = a.price;
    }
    out.panel.months.push_back(std::move(m));
  }

  // Returns from the standardized instruments of the previous month.
  const InstrumentMatrix Z = standardize(out.panel);
  out.signal.resize(c.T);
  out.signal[0] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out.panel.months[0].size()));
  double ss = 0;
  double count = 0;
  for (std::size_t t = 1; t < c.T; ++t) {
    const MonthSlice& prev = out.panel.months[t - 1];
    const MonthSlice& cur = out.panel.months[t];
    Eigen::VectorXd s = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cur.size()));
    const Eigen::VectorXd f = out.factors.row(static_cast<Eigen::Index>(t)).transpose();
    for (std::size_t a = 0, b = 0; a < prev.assets.size() && b < cur.assets.size();) {
      if (prev.assets[a] == cur.assets[b]) {
        s(static_cast<Eigen::Index>(b)) = Z.Z[t - 1].row(static_cast<Eigen::Index>(a)) * out.Gamma * f;
        ++a;
        ++b;
      } else if (prev.assets[a] < cur.assets[b]) {
        ++a;
      } else {
        ++b;
      }
    }
    ss += s.squaredNorm();
    count += static_cast<double>(s.size());
    out.signal[t] = std::move(s);
  }
  const double mean_sq = count > 0 ? ss / count : 0.0;
  out.noise_sd = c.noise_ratio * std::sqrt(mean_sq);
  for (std::size_t t = 0; t < c.T; ++t) {
    auto& m = out.panel.months[t];
    for (Eigen::Index n = 0; n < m.returns.size(); ++n) m.returns(n) = out.signal[t](n) + out.noise_sd * z(rng);
  }
  out.panel.validate();
  return out;
}

}  // namespace cipca
