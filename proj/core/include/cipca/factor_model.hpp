#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "cipca/clustering.hpp"
#include "cipca/panel.hpp"

namespace cipca {

// (I+1) x J pattern of free loadings: true = estimated, false = fixed at zero.
// Row I is the intercept (ones column).
struct RestrictionMask {
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> free;
  std::vector<std::string> factor_names;

  static RestrictionMask unrestricted(std::size_t num_characteristics, int J);
  // A single intercept-only column.
  static RestrictionMask zc_only(std::size_t num_characteristics);

  Eigen::Index rows() const { return free.rows(); }
  int num_factors() const { return static_cast<int>(free.cols()); }
  Eigen::Index intercept_row() const { return free.rows() - 1; }
  std::size_t free_count() const { return static_cast<std::size_t>(free.count()); }
  // Column whose only free entry is the intercept, or -1.
  int zc_column() const;
  bool is_unrestricted() const { return free.all(); }
};

// Column k is free on the members of cluster k and the intercept; with
// include_zc a final intercept-only column is appended.
RestrictionMask restriction_mask_from_partition(const Partition& partition, bool include_zc);

// One estimation period: instruments and weights observed at month s, returns
// realized at month s+1, over assets present in both months.
struct Period {
  int instrument_date = 0;
  int return_date = 0;
  std::vector<std::string> assets;
  Eigen::MatrixXd Z;  // N x L
  Eigen::VectorXd r;  // N
  Eigen::VectorXd w;  // N, sums to 1
  // Weighted moments: Z'WZ, Z'Wr, r'Wr.
  Eigen::MatrixXd G;
  Eigen::VectorXd b;
  double rwr = 0;
};

struct EstimationPanel {
  std::vector<int> month_dates;  // all panel months; period p pairs month p with p+1
  std::vector<Period> periods;

  Eigen::Index num_instruments() const { return periods.empty() ? 0 : periods.front().Z.cols(); }
};

EstimationPanel make_estimation_panel(const CharacteristicPanel& panel,
                                      const InstrumentMatrix& instruments,
                                      const WeightSeries& weights);

struct FitOptions {
  double tol = 1e-8;  // relative change in weighted SSE
  // After the objective test passes, iterations continue until the relative
  // residual of the loading normal equations is below this (or max_iter).
  double stationarity_tol = 1e-10;
  int max_iter = 1000;
  // Adds 1e-10 * trace to near-singular per-month Gram matrices instead of failing.
  bool ridge = false;
  // Warm start; masked entries are zeroed before use.
  std::optional<Eigen::MatrixXd> init_gamma;
};

struct FittedModel {
  Eigen::MatrixXd Gamma;    // L x J
  Eigen::MatrixXd factors;  // P x J, row p is the factor return at return_dates[p]
  std::vector<int> return_dates;
  std::vector<double> objective_path;  // weighted SSE after init and after each iteration
  std::vector<Eigen::VectorXd> residuals;
  bool converged = false;
  int iterations = 0;
  bool ridge_used = false;
};

// Restricted alternating least squares over periods [first, first + count).
// At convergence the factors are normalized: an intercept-only column, when
// present, absorbs the intercept loadings of the other columns; each factor is
// scaled to a monthly standard deviation of 1%; signs make factor means nonnegative.
FittedModel fit(const EstimationPanel& data, std::size_t first, std::size_t count,
                const RestrictionMask& mask, const FitOptions& options = {});
FittedModel fit(const EstimationPanel& data, const RestrictionMask& mask,
                const FitOptions& options = {});

// J x N operator (G'Z'WZG)^{-1} G'Z'W mapping next-month returns to factor returns.
Eigen::MatrixXd factor_weights(const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Z,
                               const Eigen::VectorXd& w, int date = 0, bool ridge = false);
// factor_weights(...) * r.
Eigen::VectorXd factor_return(const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Z,
                              const Eigen::VectorXd& w, const Eigen::VectorXd& r, int date = 0,
                              bool ridge = false);

double weighted_sse(const EstimationPanel& data, std::size_t first, std::size_t count,
                    const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& factors);

// Relative residuals of the factor and restricted loading normal equations:
// |A x - b| / (|A| |x| + |b|), the factor part maximized over periods.
struct StationarityResiduals {
  double factor = 0;
  double gamma = 0;
};
StationarityResiduals stationarity_residuals(const EstimationPanel& data, std::size_t first,
                                             std::size_t count, const RestrictionMask& mask,
                                             const Eigen::MatrixXd& Gamma,
                                             const Eigen::MatrixXd& factors);

struct FactorReturnSeries {
  std::vector<int> dates;
  std::vector<std::string> names;
  Eigen::MatrixXd F;  // T_oos x J
  std::vector<Eigen::MatrixXd> weight_snapshots;

  Eigen::Index num_factors() const { return F.cols(); }
  // Columns in `cols`, in that order.
  FactorReturnSeries select(const std::vector<int>& cols) const;
  // Rows [first, first + count).
  FactorReturnSeries rows(std::size_t first, std::size_t count) const;
};

struct OosOptions {
  std::size_t burn_in = 180;  // months; the first OOS return is month burn_in + 1
  FitOptions fit;
  bool warm_start = true;
  bool keep_weights = false;
  unsigned jobs = 1;  // only used with warm_start = false
};

// For each month t >= burn_in (1-based): fit on months 1..t, then realize the
// month t+1 factor return with portfolio weights built from month-t data.
FactorReturnSeries oos_factor_returns(const EstimationPanel& data, const RestrictionMask& mask,
                                      const OosOptions& options = {});

}  // namespace cipca
