#include "cipca/evaluation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cipca/error.hpp"
#include "log.hpp"

namespace cipca {

double annualized_sharpe(double monthly_mean, double monthly_sd) {
  if (!(monthly_sd > 0)) throw DomainError("Sharpe ratio undefined for zero volatility");
  return monthly_mean / monthly_sd * kAnnualization;
}

double max_drawdown(const Eigen::VectorXd& returns) {
  double wealth = 1.0, peak = 1.0, worst = 0.0;
  for (Eigen::Index t = 0; t < returns.size(); ++t) {
    wealth *= 1.0 + returns(t);
    peak = std::max(peak, wealth);
    worst = std::max(worst, 1.0 - wealth / peak);
  }
  return 100.0 * worst;
}

FactorStats factor_stats(const Eigen::VectorXd& returns) {
  const Eigen::Index n = returns.size();
  if (n < 2) throw PreconditionError("factor statistics need at least two months");
  const double mean = returns.mean();
  const double var = (returns.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double sd = std::sqrt(var);
  FactorStats s;
  s.mean = 100.0 * mean;
  s.sd = 100.0 * sd;
  s.sharpe = annualized_sharpe(mean, sd);
  s.mdd = max_drawdown(returns);
  return s;
}

Eigen::VectorXd tangency_direction(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                                   int date, bool ridge) {
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  const double scale = std::max(Sigma.diagonal().maxCoeff(), 0.0);
  bool ok = llt.info() == Eigen::Success;
  if (ok) {
    // LLT succeeds on nearly singular input; check conditioning of the factor.
    const auto d = llt.matrixLLT().diagonal().cwiseAbs2();
    ok = d.minCoeff() > 1e-14 * scale;
  }
  if (!ok) {
    if (!ridge) throw RankDeficiencyError(date, "singular factor covariance");
    Eigen::MatrixXd S = Sigma;
    S.diagonal().array() += 1e-10 * std::max(Sigma.trace(), 1e-300);
    log::warn("ridge added to factor covariance at {}", date);
    llt.compute(S);
    if (llt.info() != Eigen::Success) throw RankDeficiencyError(date, "covariance singular after ridge");
  }
  return llt.solve(mu);
}

TangencyResult tangency_backtest(const FactorReturnSeries& F, const TangencyOptions& options) {
  const Eigen::Index T = F.F.rows();
  const Eigen::Index J = F.F.cols();
  if (J < 1) throw PreconditionError("tangency needs at least one factor");
  if (options.burn_in < static_cast<std::size_t>(J) + 2) {
    throw PreconditionError("tangency burn-in must be at least J + 2 = " + std::to_string(J + 2));
  }
  const auto burn = static_cast<Eigen::Index>(options.burn_in);
  if (T <= burn) {
    throw PreconditionError("factor series has " + std::to_string(T) + " months; burn-in is " +
                            std::to_string(burn));
  }
  TangencyResult out;
  out.returns.resize(T - burn);
  for (Eigen::Index t = burn; t < T; ++t) {
    // A contiguous copy: reductions over a strided block vectorize by the
    // alignment of the full series, which would leak its length into the result.
    const Eigen::MatrixXd window = F.F.topRows(t);
    const Eigen::VectorXd mu = window.colwise().mean().transpose();
    const Eigen::MatrixXd centered = window.rowwise() - mu.transpose();
    const Eigen::MatrixXd Sigma = centered.transpose() * centered / static_cast<double>(t);
    const int date = F.dates.empty() ? static_cast<int>(t) : F.dates[static_cast<std::size_t>(t - 1)];
    const Eigen::VectorXd u = tangency_direction(mu, Sigma, date, options.ridge);
    const double vol = std::sqrt(u.dot(Sigma * u));
    if (!(vol > 0)) throw RankDeficiencyError(date, "zero tangency volatility");
    const double c = options.target_vol / vol;
    const Eigen::VectorXd w = c * u;
    out.weights_path.push_back(w);
    out.scaling_path.push_back(c);
    out.returns(t - burn) = w.dot(F.F.row(t));
    out.dates.push_back(F.dates.empty() ? static_cast<int>(t + 1) : F.dates[static_cast<std::size_t>(t)]);
  }
  if (out.returns.size() >= 2) {
    const double mean = out.returns.mean();
    const double sd = std::sqrt((out.returns.array() - mean).square().sum() /
                                static_cast<double>(out.returns.size() - 1));
    out.sharpe = sd > 0 ? mean / sd * kAnnualization : 0.0;
  }
  return out;
}

std::vector<int> OrderedSelection::model(std::size_t J) const {
  if (J < 1 || J > order.size()) throw PreconditionError("model size out of range");
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(J)};
}

OrderedSelection ordered_selection(const std::vector<double>& train_sharpe, int market_index) {
  const int J = static_cast<int>(train_sharpe.size());
  if (market_index < 0 || market_index >= J) throw PreconditionError("market column out of range");
  OrderedSelection out;
  out.train_sharpe = train_sharpe;
  out.order.push_back(market_index);
  std::vector<int> rest;
  for (int j = 0; j < J; ++j) {
    if (j != market_index) rest.push_back(j);
  }
  std::stable_sort(rest.begin(), rest.end(), [&](int a, int b) {
    return train_sharpe[static_cast<std::size_t>(a)] > train_sharpe[static_cast<std::size_t>(b)];
  });
  out.order.insert(out.order.end(), rest.begin(), rest.end());
  return out;
}

OrderedSelection ordered_selection(const Eigen::MatrixXd& F_train, int market_index) {
  std::vector<double> sharpe;
  for (Eigen::Index j = 0; j < F_train.cols(); ++j) sharpe.push_back(factor_stats(F_train.col(j)).sharpe);
  return ordered_selection(sharpe, market_index);
}

int default_nw_lags(std::size_t T) {
  return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(T) / 100.0, 2.0 / 9.0)));
}

Eigen::MatrixXd hac_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& e, int lags) {
  const Eigen::MatrixXd U = X.array().colwise() * e.array();  // rows are x_t e_t
  Eigen::MatrixXd S = U.transpose() * U;
  const Eigen::Index T = X.rows();
  for (int l = 1; l <= lags && l < T; ++l) {
    const double wgt = 1.0 - static_cast<double>(l) / static_cast<double>(lags + 1);
    const Eigen::MatrixXd G = U.bottomRows(T - l).transpose() * U.topRows(T - l);
    S += wgt * (G + G.transpose());
  }
  return S;
}

AlphaReport alpha_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_bench, int nw_lags) {
  const Eigen::Index T = y.size();
  if (X_bench.rows() != T) throw PreconditionError("regressand and benchmarks have different lengths");
  const Eigen::Index p = X_bench.cols() + 1;
  if (T <= p) throw PreconditionError("alpha regression needs more months than regressors");
  Eigen::MatrixXd X(T, p);
  X.col(0).setOnes();
  X.rightCols(p - 1) = X_bench;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) {
    std::string bad;
    Eigen::Index rank = 0;
    for (Eigen::Index c = 1; c <= p; ++c) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> part(X.leftCols(c));
      if (part.rank() == rank) bad += (bad.empty() ? "" : ", ") + std::to_string(c - 2);
      rank = part.rank();
    }
    throw PreconditionError("benchmark matrix is rank deficient; collinear columns: " + bad);
  }
  const Eigen::VectorXd beta = qr.solve(y);
  AlphaReport out;
  out.residuals = y - X * beta;
  out.nw_lags = nw_lags < 0 ? default_nw_lags(static_cast<std::size_t>(T)) : nw_lags;
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const Eigen::MatrixXd V = bread * hac_meat(X, out.residuals, out.nw_lags) * bread;
  out.alpha = 100.0 * beta(0);
  out.se_alpha = 100.0 * std::sqrt(std::max(V(0, 0), 0.0));
  out.tstat_alpha = out.se_alpha > 0 ? out.alpha / out.se_alpha : 0.0;
  out.betas = beta.tail(p - 1);
  return out;
}

}  // namespace cipca
