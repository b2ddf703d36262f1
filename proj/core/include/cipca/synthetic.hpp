#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cipca/clustering.hpp"
#include "cipca/factor_model.hpp"
#include "cipca/panel.hpp"

namespace cipca {

// Panel with planted characteristic blocks and a planted block-restricted
// factor structure:
//   x = sqrt(inter) h + sqrt(intra - inter) g_k + sqrt(1 - intra) e   (AR(1) over time)
//   r_{t+1} = Z_t Gamma* f*_{t+1} + noise, noise SD = noise_ratio * signal RMS
// Gamma* column k loads on block k only; the optional last column is an
// intercept-only market factor.
struct SyntheticConfig {
  std::size_t N = 200;
  std::size_t T = 240;
  std::size_t I = 12;
  int K = 3;
  bool zc = true;
  double intra_corr = 0.8;
  double inter_corr = 0.2;
  double persistence = 0.9;
  double noise_ratio = 0.5;
  double market_mean = 0.006;
  double market_sd = 0.04;
  double factor_mean = 0.005;
  double factor_sd = 0.02;
  double turnover = 0.0;  // fraction of assets replaced each month
  std::uint64_t seed = 1;
  int start_date = 200001;
};

struct SyntheticPanel {
  CharacteristicPanel panel;
  Partition truth;
  RestrictionMask mask;
  Eigen::MatrixXd Gamma;    // (I+1) x J
  Eigen::MatrixXd factors;  // T x J; row t drives month-t returns (row 0 unused)
  std::vector<Eigen::VectorXd> signal;  // noiseless return component per month
  double noise_sd = 0;
};

SyntheticPanel make_synthetic_panel(const SyntheticConfig& config);

int add_months(int yyyymm, int months);

}  // namespace cipca
