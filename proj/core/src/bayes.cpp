#include "cipca/bayes.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cipca/error.hpp"
#include "cipca/parallel.hpp"

namespace cipca {

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Sufficient statistics of a block of months.
struct Moments {
  double n = 0;
  Eigen::VectorXd sum;
  Eigen::MatrixXd cross;  // sum of f f'
};

Moments moments(const Eigen::MatrixXd& F) {
  Moments m;
  m.n = static_cast<double>(F.rows());
  m.sum = F.colwise().sum().transpose();
  m.cross = F.transpose() * F;
  return m;
}

Eigen::VectorXd sub(const Eigen::VectorXd& v, const std::vector<int>& a) {
  Eigen::VectorXd out(ix(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) out(ix(i)) = v(a[i]);
  return out;
}

Eigen::MatrixXd sub(const Eigen::MatrixXd& M, const std::vector<int>& r, const std::vector<int>& c) {
  Eigen::MatrixXd out(ix(r.size()), ix(c.size()));
  for (std::size_t i = 0; i < r.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) out(ix(i), ix(j)) = M(r[i], c[j]);
  }
  return out;
}

// log|A| for symmetric positive definite A; throws naming the block otherwise.
double logdet_spd(const Eigen::MatrixXd& A, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw DomainError(std::string(what) + " is not positive definite");
  const auto d = llt.matrixLLT().diagonal();
  if (d.minCoeff() <= 1e-6 * d.maxCoeff()) throw DomainError(std::string(what) + " is singular");
  return 2.0 * d.array().log().sum();
}

double log_multigamma(double a, Eigen::Index p) {
  double out = 0.25 * static_cast<double>(p * (p - 1)) * std::log(std::numbers::pi);
  for (Eigen::Index j = 1; j <= p; ++j) out += std::lgamma(a + 0.5 * static_cast<double>(1 - j));
  return out;
}

PriorSpec prior_from_moments(const Moments& m, const ModelSpec& spec, double tr, double sh2max) {
  const std::size_t p = spec.included.size();
  PriorSpec prior;
  prior.tr = tr;
  prior.sh2max = sh2max;
  prior.prior_months = static_cast<std::size_t>(m.n);
  prior.k = sh2max / static_cast<double>(p);
  if (!(prior.k > 0)) throw DomainError("prior scale k must be positive (sh2max > 0)");
  const Eigen::VectorXd mean = sub(m.sum, spec.included) / m.n;
  prior.alpha0 = mean;
  prior.Sigma0 = sub(m.cross, spec.included, spec.included) / m.n - mean * mean.transpose();
  logdet_spd(prior.Sigma0, "prior covariance of the included factors");
  if (!spec.excluded.empty()) {
    prior.Lambda0 = sub(m.cross, spec.included, spec.included);
    const Eigen::MatrixXd XtY = sub(m.cross, spec.included, spec.excluded);
    prior.B0 = prior.Lambda0.ldlt().solve(XtY);
    prior.Psi0 = (sub(m.cross, spec.excluded, spec.excluded) - XtY.transpose() * prior.B0) / m.n;
    prior.Psi0 = 0.5 * (prior.Psi0 + prior.Psi0.transpose()).eval();
    logdet_spd(prior.Psi0, "prior residual covariance of the excluded factors");
  }
  return prior;
}

double log_marginal_moments(const ModelSpec& spec, const Moments& m, const PriorSpec& prior) {
  const double n = m.n;
  const auto p = ix(spec.included.size());
  const double logpi = std::log(std::numbers::pi);

  // Included block: normal-inverse-Wishart mean model.
  const double kappa0 = 1.0 / prior.k;
  const double nu0 = static_cast<double>(p) + 2.0;
  const double kappan = kappa0 + n;
  const double nun = nu0 + n;
  const Eigen::VectorXd ybar = sub(m.sum, spec.included) / n;
  const Eigen::MatrixXd S = sub(m.cross, spec.included, spec.included) - n * ybar * ybar.transpose();
  const Eigen::VectorXd dev = ybar - prior.alpha0;
  const Eigen::MatrixXd Psin = prior.Sigma0 + S + (kappa0 * n / kappan) * dev * dev.transpose();
  double out = -0.5 * n * static_cast<double>(p) * logpi + log_multigamma(0.5 * nun, p) -
               log_multigamma(0.5 * nu0, p) + 0.5 * nu0 * logdet_spd(prior.Sigma0, "included prior scale") -
               0.5 * nun * logdet_spd(Psin, "included posterior scale") +
               0.5 * static_cast<double>(p) * (std::log(kappa0) - std::log(kappan));

  if (spec.excluded.empty()) return out;

  // Excluded block: zero-intercept matrix-normal regression on the included factors.
  const auto q = ix(spec.excluded.size());
  const double mu0 = static_cast<double>(q) + 2.0;
  const double mun = mu0 + n;
  const Eigen::MatrixXd XtX = sub(m.cross, spec.included, spec.included);
  const Eigen::MatrixXd XtY = sub(m.cross, spec.included, spec.excluded);
  const Eigen::MatrixXd YtY = sub(m.cross, spec.excluded, spec.excluded);
  const Eigen::MatrixXd Lambdan = XtX + prior.Lambda0;
  const Eigen::MatrixXd Bn = Lambdan.ldlt().solve(XtY + prior.Lambda0 * prior.B0);
  const Eigen::MatrixXd dB = Bn - prior.B0;
  // (Y - X Bn)'(Y - X Bn) from moments.
  const Eigen::MatrixXd resid = YtY - Bn.transpose() * XtY - XtY.transpose() * Bn + Bn.transpose() * XtX * Bn;
  Eigen::MatrixXd Psin2 = prior.Psi0 + resid + dB.transpose() * prior.Lambda0 * dB;
  Psin2 = 0.5 * (Psin2 + Psin2.transpose()).eval();
  out += -0.5 * n * static_cast<double>(q) * logpi +
         0.5 * static_cast<double>(q) *
             (logdet_spd(prior.Lambda0, "excluded prior precision") - logdet_spd(Lambdan, "excluded posterior precision")) +
         0.5 * mu0 * logdet_spd(prior.Psi0, "excluded prior scale") -
         0.5 * mun * logdet_spd(Psin2, "excluded posterior scale") + log_multigamma(0.5 * mun, q) -
         log_multigamma(0.5 * mu0, q);
  return out;
}

}  // namespace

ModelSpec model_from_id(std::uint32_t id, int J) {
  ModelSpec s;
  s.id = id;
  for (int j = 0; j < J; ++j) ((id >> j) & 1u ? s.included : s.excluded).push_back(j);
  return s;
}

std::vector<ModelSpec> enumerate_models(int J) {
  if (J < 1 || J > kMaxEnumeratedFactors) {
    throw PreconditionError("model enumeration supports 1 <= J <= " +
                            std::to_string(kMaxEnumeratedFactors) + " (got " + std::to_string(J) + ")");
  }
  const std::uint32_t L = (1u << J) - 1u;
  std::vector<ModelSpec> out;
  out.reserve(L);
  for (std::uint32_t id = 1; id <= L; ++id) out.push_back(model_from_id(id, J));
  return out;
}

std::size_t prior_sample_length(std::size_t T, double tr) {
  if (!(tr > 0 && tr < 1)) throw PreconditionError("tr must lie in (0, 1)");
  return static_cast<std::size_t>(std::floor(tr * static_cast<double>(T)));
}

double max_squared_sharpe(const Eigen::MatrixXd& F) {
  const Eigen::VectorXd mu = F.colwise().mean().transpose();
  const Eigen::MatrixXd c = F.rowwise() - mu.transpose();
  const Eigen::MatrixXd Sigma = c.transpose() * c / static_cast<double>(F.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
  if (llt.info() != Eigen::Success) throw DomainError("factor covariance is not positive definite");
  return mu.dot(llt.solve(mu));
}

PriorSpec estimate_prior(const Eigen::MatrixXd& F, const ModelSpec& spec, double tr, double sh2max) {
  const std::size_t n = prior_sample_length(static_cast<std::size_t>(F.rows()), tr);
  if (n < spec.included.size() + 2 || n < static_cast<std::size_t>(F.cols()) + 2) {
    throw PreconditionError("prior sample of " + std::to_string(n) + " months is too short for " +
                            std::to_string(F.cols()) + " factors");
  }
  if (spec.included.empty()) throw PreconditionError("model has no included factors");
  return prior_from_moments(moments(F.topRows(ix(n))), spec, tr, sh2max);
}

double log_marginal(const ModelSpec& spec, const Eigen::MatrixXd& F_post, const PriorSpec& prior) {
  if (static_cast<double>(F_post.rows()) <= static_cast<double>(F_post.cols()) + 2) {
    throw PreconditionError("posterior sample must exceed J + 2 months");
  }
  return log_marginal_moments(spec, moments(F_post), prior);
}

std::vector<ModelPosterior> BayesResult::top(std::size_t n) const {
  return {ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::min(n, ranked.size()))};
}

BayesResult posterior_rank(const Eigen::MatrixXd& F, const BayesOptions& options) {
  const int J = static_cast<int>(F.cols());
  auto specs = enumerate_models(J);
  const std::size_t T = static_cast<std::size_t>(F.rows());
  const std::size_t n_prior = prior_sample_length(T, options.tr);
  if (n_prior < static_cast<std::size_t>(J) + 2) {
    throw PreconditionError("prior sample of " + std::to_string(n_prior) + " months is too short for " +
                            std::to_string(J) + " factors");
  }
  if (static_cast<double>(T - n_prior) <= static_cast<double>(J) + 2) {
    throw PreconditionError("posterior sample must exceed J + 2 months");
  }
  BayesResult out;
  out.prior_months = n_prior;
  out.sh2max = options.sh2max ? *options.sh2max : max_squared_sharpe(F.topRows(ix(n_prior)));
  const Moments prior_m = moments(F.topRows(ix(n_prior)));
  const Moments post_m = moments(F.bottomRows(ix(T - n_prior)));

  std::vector<ModelPosterior> all(specs.size());
  parallel_for(specs.size(), options.jobs, [&](std::size_t i) {
    const PriorSpec prior = prior_from_moments(prior_m, specs[i], options.tr, out.sh2max);
    all[i].spec = specs[i];
    all[i].log_marginal = log_marginal_moments(specs[i], post_m, prior);
  });
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& m : all) hi = std::max(hi, m.log_marginal);
  double z = 0;
  for (const auto& m : all) z += std::exp(m.log_marginal - hi);
  const double log_z = hi + std::log(z);
  for (auto& m : all) m.posterior = std::exp(m.log_marginal - log_z);
  std::stable_sort(all.begin(), all.end(), [](const ModelPosterior& a, const ModelPosterior& b) {
    if (a.posterior != b.posterior) return a.posterior > b.posterior;
    return a.spec.id < b.spec.id;
  });
  out.ranked = std::move(all);
  return out;
}

}  // namespace cipca
