#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <vector>

#include "cipca/factor_model.hpp"

namespace cipca {

// Percent units: mean and sd are % per month, mdd is %.
struct FactorStats {
  double mean = 0;
  double sd = 0;
  double sharpe = 0;  // annualized
  double mdd = 0;
};

inline constexpr double kAnnualization = 3.4641016151377545870548926830117;  // sqrt(12)

// Sample mean and (n-1) standard deviation of decimal monthly returns.
FactorStats factor_stats(const Eigen::VectorXd& returns);
double annualized_sharpe(double monthly_mean, double monthly_sd);
// Largest peak-to-trough decline of prod(1 + r), in percent. The initial wealth
// of 1 counts as a peak.
double max_drawdown(const Eigen::VectorXd& returns);

struct TangencyOptions {
  std::size_t burn_in = 60;
  double target_vol = 0.01;
  bool ridge = false;  // add 1e-10 * trace to a singular covariance instead of failing
};

struct TangencyResult {
  std::vector<int> dates;  // realization months
  std::vector<Eigen::VectorXd> weights_path;
  std::vector<double> scaling_path;
  Eigen::VectorXd returns;
  double sharpe = 0;
};

// Unscaled tangency direction Sigma^{-1} mu.
Eigen::VectorXd tangency_direction(const Eigen::VectorXd& mu, const Eigen::MatrixXd& Sigma,
                                   int date = 0, bool ridge = false);

// Expanding-window tangency portfolio: weights at month t use rows 1..t
// (mean and 1/t covariance), scaled to `target_vol` in-sample, and earn row t+1.
TangencyResult tangency_backtest(const FactorReturnSeries& F, const TangencyOptions& options = {});

struct OrderedSelection {
  std::vector<int> order;  // market first, then descending training Sharpe
  std::vector<double> train_sharpe;

  // Columns of the J-factor model.
  std::vector<int> model(std::size_t J) const;
};

OrderedSelection ordered_selection(const std::vector<double>& train_sharpe, int market_index);
OrderedSelection ordered_selection(const Eigen::MatrixXd& F_train, int market_index);

struct AlphaReport {
  double alpha = 0;  // % per month
  double se_alpha = 0;
  double tstat_alpha = 0;
  Eigen::VectorXd betas;
  Eigen::VectorXd residuals;
  int nw_lags = 0;
};

int default_nw_lags(std::size_t T);

// Bartlett-kernel HAC estimate of the long-run covariance of x_t e_t (no bread).
Eigen::MatrixXd hac_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& e, int lags);

// OLS of y on [1, X_bench] with Newey-West standard errors. nw_lags < 0 picks
// default_nw_lags.
AlphaReport alpha_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& X_bench,
                             int nw_lags = -1);

}  // namespace cipca
