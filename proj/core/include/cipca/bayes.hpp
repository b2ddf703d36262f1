#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace cipca {

// Factor subset: `included` factors are the candidate efficient set, the rest
// must be priced by them with zero intercept.
struct ModelSpec {
  std::uint32_t id = 0;  // bit j set <=> factor j included
  std::vector<int> included;
  std::vector<int> excluded;
};

inline constexpr int kMaxEnumeratedFactors = 20;

// All 2^J - 1 nonempty subsets in binary-counting order (id 1, 2, ..., 2^J - 1).
std::vector<ModelSpec> enumerate_models(int J);
ModelSpec model_from_id(std::uint32_t id, int J);

// Conjugate priors estimated on the first floor(tr * T) months.
//   Included block: alpha | Sigma ~ N(alpha0, k Sigma), Sigma ~ IW(p + 2, Sigma0),
//   k = sh2max / J_l.
//   Excluded block: f* = B' f + e (no intercept), B | S ~ MN(B0, Lambda0^{-1}, S),
//   S ~ IW(q + 2, Psi0), with B0 the prior-sample OLS fit, Lambda0 = X'X and
//   Psi0 the residual covariance over the prior sample.
struct PriorSpec {
  double tr = 0.1;
  double sh2max = 0;
  double k = 0;
  std::size_t prior_months = 0;
  Eigen::VectorXd alpha0;
  Eigen::MatrixXd Sigma0;
  Eigen::MatrixXd B0;
  Eigen::MatrixXd Lambda0;
  Eigen::MatrixXd Psi0;
};

std::size_t prior_sample_length(std::size_t T, double tr);

// Squared Sharpe ratio of the tangency portfolio mu' Sigma^{-1} mu (1/T covariance).
double max_squared_sharpe(const Eigen::MatrixXd& F);

// F is the full T x J series; only its first floor(tr * T) rows are used.
PriorSpec estimate_prior(const Eigen::MatrixXd& F, const ModelSpec& spec, double tr, double sh2max);

// Log evidence of the posterior-sample series F_post (T_post x J).
double log_marginal(const ModelSpec& spec, const Eigen::MatrixXd& F_post, const PriorSpec& prior);

struct ModelPosterior {
  ModelSpec spec;
  double log_marginal = 0;
  double posterior = 0;
};

struct BayesOptions {
  double tr = 0.1;
  std::optional<double> sh2max;  // default: prior-sample tangency over all factors
  std::size_t top_n = 10;
  unsigned jobs = 1;
};

struct BayesResult {
  std::vector<ModelPosterior> ranked;  // all models, descending posterior
  double sh2max = 0;
  std::size_t prior_months = 0;

  std::vector<ModelPosterior> top(std::size_t n) const;
};

// Equal model priors 1 / (2^J - 1); posteriors normalized in log space.
BayesResult posterior_rank(const Eigen::MatrixXd& F, const BayesOptions& options = {});

}  // namespace cipca
