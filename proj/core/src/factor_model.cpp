#include "cipca/factor_model.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>

#include "cipca/error.hpp"
#include "cipca/parallel.hpp"
#include "log.hpp"

namespace cipca {

namespace {

constexpr double kRcondFloor = 1e-13;
constexpr double kRidgeScale = 1e-10;

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

// LDLT rcond() misses exact singularity; compare pivots instead.
bool well_conditioned(const Eigen::LDLT<Eigen::MatrixXd>& ldlt) {
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
  const Eigen::VectorXd d = ldlt.vectorD();
  const double hi = d.cwiseAbs().maxCoeff();
  return hi > 0 && d.minCoeff() > kRcondFloor * hi;
}

// Solves A x = rhs for a symmetric PSD J x J Gram; throws on singularity.
Eigen::MatrixXd solve_gram(Eigen::MatrixXd A, const Eigen::MatrixXd& rhs, int date, bool ridge,
                           bool* ridge_used = nullptr) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const bool ok = well_conditioned(ldlt);
  if (!ok) {
    if (!ridge) throw RankDeficiencyError(date, "singular Gamma' Z' W Z Gamma");
    A.diagonal().array() += kRidgeScale * std::max(A.trace(), 1e-300);
    ldlt.compute(A);
    if (!well_conditioned(ldlt)) throw RankDeficiencyError(date, "Gram singular after ridge");
    if (ridge_used) *ridge_used = true;
  }
  return ldlt.solve(rhs);
}

struct FreeIndex {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> entries;  // (l, j), column-major order
};

FreeIndex free_entries(const RestrictionMask& mask) {
  FreeIndex out;
  for (Eigen::Index j = 0; j < mask.free.cols(); ++j) {
    for (Eigen::Index l = 0; l < mask.free.rows(); ++l) {
      if (mask.free(l, j)) out.entries.emplace_back(l, j);
    }
  }
  return out;
}

// Normal equations of the restricted Gamma step for fixed factors.
void gamma_system(const EstimationPanel& data, std::size_t first, std::size_t count,
                  const FreeIndex& fi, const Eigen::MatrixXd& factors, Eigen::Index L,
                  Eigen::Index J, Eigen::MatrixXd& A, Eigen::VectorXd& rhs) {
  // M(j, j2) = sum_p f_pj f_pj2 G_p ; v_j = sum_p f_pj b_p
  std::vector<Eigen::MatrixXd> M(static_cast<std::size_t>(J * J));
  for (auto& m : M) m = Eigen::MatrixXd::Zero(L, L);
  Eigen::MatrixXd V = Eigen::MatrixXd::Zero(L, J);
  for (std::size_t k = 0; k < count; ++k) {
    const Period& p = data.periods[first + k];
    const auto f = factors.row(ix(k));
    for (Eigen::Index j = 0; j < J; ++j) {
      V.col(j) += f(j) * p.b;
      for (Eigen::Index j2 = j; j2 < J; ++j2) {
        M[static_cast<std::size_t>(j * J + j2)].noalias() += (f(j) * f(j2)) * p.G;
      }
    }
  }
  const auto n = static_cast<Eigen::Index>(fi.entries.size());
  A.resize(n, n);
  rhs.resize(n);
  for (Eigen::Index q = 0; q < n; ++q) {
    const auto [l, j] = fi.entries[static_cast<std::size_t>(q)];
    rhs(q) = V(l, j);
    for (Eigen::Index q2 = 0; q2 < n; ++q2) {
      const auto [l2, j2] = fi.entries[static_cast<std::size_t>(q2)];
      A(q, q2) = j <= j2 ? M[static_cast<std::size_t>(j * J + j2)](l, l2)
                         : M[static_cast<std::size_t>(j2 * J + j)](l2, l);
    }
  }
}

Eigen::MatrixXd gamma_step(const EstimationPanel& data, std::size_t first, std::size_t count,
                           const FreeIndex& fi, const Eigen::MatrixXd& factors, Eigen::Index L,
                           Eigen::Index J, const Eigen::MatrixXd& previous, double* residual) {
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
  gamma_system(data, first, count, fi, factors, L, J, A, rhs);
  // Normal-equation residual of the incoming Gamma against the current factors.
  Eigen::VectorXd g(ix(fi.entries.size()));
  for (std::size_t q = 0; q < fi.entries.size(); ++q) g(ix(q)) = previous(fi.entries[q].first, fi.entries[q].second);
  const double den = A.norm() * g.norm() + rhs.norm();
  *residual = den > 0 ? (A * g - rhs).norm() / den : 0.0;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::VectorXd x;
  if (well_conditioned(ldlt)) {
    x = ldlt.solve(rhs);
  } else {
    x = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(rhs);
  }
  Eigen::MatrixXd Gamma = Eigen::MatrixXd::Zero(L, J);
  for (std::size_t q = 0; q < fi.entries.size(); ++q) {
    Gamma(fi.entries[q].first, fi.entries[q].second) = x(ix(q));
  }
  return Gamma;
}

Eigen::MatrixXd factor_step(const EstimationPanel& data, std::size_t first, std::size_t count,
                            const Eigen::MatrixXd& Gamma, bool ridge, bool* ridge_used) {
  Eigen::MatrixXd F(ix(count), Gamma.cols());
  for (std::size_t k = 0; k < count; ++k) {
    const Period& p = data.periods[first + k];
    const Eigen::MatrixXd A = Gamma.transpose() * p.G * Gamma;
    const Eigen::VectorXd rhs = Gamma.transpose() * p.b;
    F.row(ix(k)) = solve_gram(A, rhs, p.return_date, ridge, ridge_used).transpose();
  }
  return F;
}

// Leading left singular vectors of the managed-portfolio matrix restricted to
// each column's free rows. Columns sharing a free pattern take successive
// singular vectors. Intercept row is left out of cluster columns so the
// characteristic part drives the start; an intercept-only column starts at e_int.
Eigen::MatrixXd initial_gamma(const EstimationPanel& data, std::size_t first, std::size_t count,
                              const RestrictionMask& mask) {
  const Eigen::Index L = mask.rows();
  const Eigen::Index J = mask.free.cols();
  const Eigen::Index icpt = mask.intercept_row();
  Eigen::MatrixXd B(L, ix(count));
  for (std::size_t k = 0; k < count; ++k) B.col(ix(k)) = data.periods[first + k].b;

  Eigen::MatrixXd Gamma = Eigen::MatrixXd::Zero(L, J);
  std::map<std::vector<Eigen::Index>, int> seen;
  for (Eigen::Index j = 0; j < J; ++j) {
    std::vector<Eigen::Index> rows;
    const bool all_free = mask.free.col(j).all();
    for (Eigen::Index l = 0; l < L; ++l) {
      if (mask.free(l, j) && (all_free || l != icpt)) rows.push_back(l);
    }
    if (rows.empty()) {
      if (mask.free(icpt, j)) Gamma(icpt, j) = 1.0;
      continue;
    }
    const int rank_slot = seen[rows]++;
    Eigen::MatrixXd sub(ix(rows.size()), B.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) sub.row(ix(r)) = B.row(rows[r]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub, Eigen::ComputeFullU);
    const Eigen::Index slot = std::min<Eigen::Index>(rank_slot, svd.matrixU().cols() - 1);
    for (std::size_t r = 0; r < rows.size(); ++r) Gamma(rows[r], j) = svd.matrixU()(ix(r), slot);
  }
  return Gamma;
}

double max_abs_rel(double num, double den) { return den > 0 ? num / den : num; }

}  // namespace

int RestrictionMask::zc_column() const {
  const Eigen::Index icpt = intercept_row();
  for (Eigen::Index j = 0; j < free.cols(); ++j) {
    if (free(icpt, j) && free.col(j).count() == 1) return static_cast<int>(j);
  }
  return -1;
}

RestrictionMask RestrictionMask::unrestricted(std::size_t num_characteristics, int J) {
  if (J < 1) throw PreconditionError("need at least one factor");
  RestrictionMask m;
  m.free = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(ix(num_characteristics + 1), J, true);
  for (int j = 0; j < J; ++j) m.factor_names.push_back("F" + std::to_string(j + 1));
  return m;
}

RestrictionMask RestrictionMask::zc_only(std::size_t num_characteristics) {
  RestrictionMask m;
  m.free = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(ix(num_characteristics + 1), 1, false);
  m.free(ix(num_characteristics), 0) = true;
  m.factor_names = {"ZC"};
  return m;
}

RestrictionMask restriction_mask_from_partition(const Partition& partition, bool include_zc) {
  partition.validate();
  const std::size_t I = partition.size();
  const int K = partition.K;
  RestrictionMask m;
  m.free = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(ix(I + 1), K + (include_zc ? 1 : 0), false);
  for (std::size_t i = 0; i < I; ++i) m.free(ix(i), partition.assignment[i]) = true;
  for (int k = 0; k < K; ++k) {
    m.free(ix(I), k) = true;
    const bool labelled = partition.labels.size() == static_cast<std::size_t>(K) &&
                          !partition.labels[static_cast<std::size_t>(k)].empty();
    m.factor_names.push_back(labelled ? partition.labels[static_cast<std::size_t>(k)]
                                      : "C" + std::to_string(k + 1));
  }
  if (include_zc) {
    m.free(ix(I), K) = true;
    m.factor_names.push_back("ZC");
  }
  return m;
}

EstimationPanel make_estimation_panel(const CharacteristicPanel& panel,
                                      const InstrumentMatrix& instruments,
                                      const WeightSeries& weights) {
  const std::size_t T = panel.num_months();
  if (instruments.Z.size() != T || weights.w.size() != T) {
    throw PreconditionError("panel, instruments and weights cover different month counts");
  }
  EstimationPanel out;
  out.month_dates = panel.dates();
  for (std::size_t s = 0; s + 1 < T; ++s) {
    const MonthSlice& now = panel.months[s];
    const MonthSlice& next = panel.months[s + 1];
    // Both asset lists are sorted.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> match;
    for (std::size_t a = 0, b = 0; a < now.assets.size() && b < next.assets.size();) {
      if (now.assets[a] == next.assets[b]) {
        match.emplace_back(ix(a), ix(b));
        ++a;
        ++b;
      } else if (now.assets[a] < next.assets[b]) {
        ++a;
      } else {
        ++b;
      }
    }
    Period p;
    p.instrument_date = now.date;
    p.return_date = next.date;
    const Eigen::MatrixXd& Zs = instruments.Z[s];
    const Eigen::Index N = ix(match.size());
    p.Z.resize(N, Zs.cols());
    p.r.resize(N);
    p.w.resize(N);
    for (Eigen::Index n = 0; n < N; ++n) {
      const auto [a, b] = match[static_cast<std::size_t>(n)];
      p.assets.push_back(now.assets[static_cast<std::size_t>(a)]);
      p.Z.row(n) = Zs.row(a);
      p.r(n) = next.returns(b);
      p.w(n) = weights.w[s](a);
    }
    const double total = p.w.sum();
    if (N == 0 || !(total > 0)) throw EmptyMonthError(now.date);
    p.w /= total;
    const Eigen::MatrixXd WZ = p.w.asDiagonal() * p.Z;
    p.G = p.Z.transpose() * WZ;
    p.b = WZ.transpose() * p.r;
    p.rwr = p.r.dot(p.w.asDiagonal() * p.r);
    out.periods.push_back(std::move(p));
  }
  return out;
}

double weighted_sse(const EstimationPanel& data, std::size_t first, std::size_t count,
                    const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& factors) {
  double sse = 0;
  for (std::size_t k = 0; k < count; ++k) {
    const Period& p = data.periods[first + k];
    const Eigen::VectorXd e = p.r - p.Z * (Gamma * factors.row(ix(k)).transpose());
    sse += e.dot(p.w.asDiagonal() * e);
  }
  return sse;
}

StationarityResiduals stationarity_residuals(const EstimationPanel& data, std::size_t first,
                                             std::size_t count, const RestrictionMask& mask,
                                             const Eigen::MatrixXd& Gamma,
                                             const Eigen::MatrixXd& factors) {
  StationarityResiduals out;
  for (std::size_t k = 0; k < count; ++k) {
    const Period& p = data.periods[first + k];
    const Eigen::MatrixXd A = Gamma.transpose() * p.G * Gamma;
    const Eigen::VectorXd rhs = Gamma.transpose() * p.b;
    const Eigen::VectorXd f = factors.row(ix(k)).transpose();
    const double res = (A * f - rhs).norm();
    out.factor = std::max(out.factor, max_abs_rel(res, A.norm() * f.norm() + rhs.norm()));
  }
  const FreeIndex fi = free_entries(mask);
  Eigen::MatrixXd A;
  Eigen::VectorXd rhs;
  gamma_system(data, first, count, fi, factors, Gamma.rows(), Gamma.cols(), A, rhs);
  Eigen::VectorXd g(ix(fi.entries.size()));
  for (std::size_t q = 0; q < fi.entries.size(); ++q) g(ix(q)) = Gamma(fi.entries[q].first, fi.entries[q].second);
  out.gamma = max_abs_rel((A * g - rhs).norm(), A.norm() * g.norm() + rhs.norm());
  return out;
}

FittedModel fit(const EstimationPanel& data, std::size_t first, std::size_t count,
                const RestrictionMask& mask, const FitOptions& options) {
  if (count < 2) throw PreconditionError("fit needs at least two estimation periods");
  if (first + count > data.periods.size()) throw PreconditionError("fit window exceeds the panel");
  const Eigen::Index L = data.num_instruments();
  const Eigen::Index J = mask.free.cols();
  if (mask.rows() != L) {
    throw PreconditionError("mask has " + std::to_string(mask.rows()) + " rows for " +
                            std::to_string(L) + " instruments");
  }
  if (J < 1 || J > L) throw PreconditionError("factor count must lie in [1, I+1]");
  for (std::size_t k = 0; k < count; ++k) {
    const Period& p = data.periods[first + k];
    if (p.Z.rows() < J) throw RankDeficiencyError(p.return_date, "fewer assets than factors");
  }

  const FreeIndex fi = free_entries(mask);
  FittedModel model;
  Eigen::MatrixXd Gamma;
  if (options.init_gamma) {
    if (options.init_gamma->rows() != L || options.init_gamma->cols() != J) {
      throw PreconditionError("initial Gamma has the wrong shape");
    }
    Gamma = mask.free.select(*options.init_gamma, 0.0);
  } else {
    Gamma = initial_gamma(data, first, count, mask);
  }
  Eigen::MatrixXd F = factor_step(data, first, count, Gamma, options.ridge, &model.ridge_used);

  double total = 0;
  for (std::size_t k = 0; k < count; ++k) total += data.periods[first + k].rwr;
  const double floor = 1e-14 * std::max(total, 1e-300);

  double obj = weighted_sse(data, first, count, Gamma, F);
  model.objective_path.push_back(obj);
  // The objective flattens quadratically near the optimum, so its relative
  // change alone leaves the loading normal equations loosely satisfied. Once it
  // is below tol, iterate on until the Gamma residual also clears the bar.
  for (int it = 1; it <= options.max_iter; ++it) {
    double residual = 0;
    Eigen::MatrixXd next_gamma = gamma_step(data, first, count, fi, F, L, J, Gamma, &residual);
    if (model.converged && residual < options.stationarity_tol) break;
    Gamma = std::move(next_gamma);
    F = factor_step(data, first, count, Gamma, options.ridge, &model.ridge_used);
    const double next = weighted_sse(data, first, count, Gamma, F);
    model.objective_path.push_back(next);
    model.iterations = it;
    const double change = std::abs(obj - next) / std::max(obj, floor);
    obj = next;
    if (change < options.tol) model.converged = true;
  }
  if (!model.converged) {
    log::warn("ALS stopped after {} iterations without converging", model.iterations);
  }

  // Identification. Shearing intercept loadings into the ZC column leaves the
  // fitted values unchanged and pins the otherwise free mixing.
  const int zc = mask.zc_column();
  const Eigen::Index icpt = mask.intercept_row();
  if (zc >= 0 && Gamma(icpt, zc) != 0.0) {
    for (Eigen::Index j = 0; j < J; ++j) {
      if (j == zc || !mask.free(icpt, j)) continue;
      const double c = Gamma(icpt, j) / Gamma(icpt, zc);
      Gamma.col(j) -= c * Gamma.col(zc);
      Gamma(icpt, j) = 0.0;
      F.col(zc) += c * F.col(j);
    }
  }
  for (Eigen::Index j = 0; j < J; ++j) {
    const double mean = F.col(j).mean();
    const double sd = std::sqrt((F.col(j).array() - mean).square().mean());
    if (sd > 0) {
      const double s = 0.01 / sd;
      F.col(j) *= s;
      Gamma.col(j) /= s;
    }
    if (F.col(j).mean() < 0) {
      F.col(j) = -F.col(j);
      Gamma.col(j) = -Gamma.col(j);
    }
  }
  Gamma = mask.free.select(Gamma, 0.0);

  model.Gamma = std::move(Gamma);
  model.factors = std::move(F);
  for (std::size_t k = 0; k < count; ++k) {
    const Period& p = data.periods[first + k];
    model.return_dates.push_back(p.return_date);
    model.residuals.push_back(p.r - p.Z * (model.Gamma * model.factors.row(ix(k)).transpose()));
  }
  return model;
}

FittedModel fit(const EstimationPanel& data, const RestrictionMask& mask, const FitOptions& options) {
  return fit(data, 0, data.periods.size(), mask, options);
}

Eigen::MatrixXd factor_weights(const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Z,
                               const Eigen::VectorXd& w, int date, bool ridge) {
  const Eigen::MatrixXd beta = Z * Gamma;  // N x J
  const Eigen::MatrixXd Wbeta = w.asDiagonal() * beta;
  const Eigen::MatrixXd A = beta.transpose() * Wbeta;
  return solve_gram(A, Wbeta.transpose(), date, ridge);
}

Eigen::VectorXd factor_return(const Eigen::MatrixXd& Gamma, const Eigen::MatrixXd& Z,
                              const Eigen::VectorXd& w, const Eigen::VectorXd& r, int date,
                              bool ridge) {
  return factor_weights(Gamma, Z, w, date, ridge) * r;
}

FactorReturnSeries FactorReturnSeries::select(const std::vector<int>& cols) const {
  FactorReturnSeries out;
  out.dates = dates;
  out.F.resize(F.rows(), ix(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    if (cols[c] < 0 || cols[c] >= F.cols()) throw PreconditionError("factor column out of range");
    out.F.col(ix(c)) = F.col(cols[c]);
    if (static_cast<std::size_t>(cols[c]) < names.size()) out.names.push_back(names[static_cast<std::size_t>(cols[c])]);
  }
  for (const auto& snap : weight_snapshots) {
    Eigen::MatrixXd s(ix(cols.size()), snap.cols());
    for (std::size_t c = 0; c < cols.size(); ++c) s.row(ix(c)) = snap.row(cols[c]);
    out.weight_snapshots.push_back(std::move(s));
  }
  return out;
}

FactorReturnSeries FactorReturnSeries::rows(std::size_t first, std::size_t count) const {
  if (first + count > dates.size()) throw PreconditionError("row range exceeds the series");
  FactorReturnSeries out;
  out.names = names;
  out.dates.assign(dates.begin() + static_cast<std::ptrdiff_t>(first),
                   dates.begin() + static_cast<std::ptrdiff_t>(first + count));
  out.F = F.middleRows(ix(first), ix(count));
  if (weight_snapshots.size() == dates.size()) {
    out.weight_snapshots.assign(weight_snapshots.begin() + static_cast<std::ptrdiff_t>(first),
                                weight_snapshots.begin() + static_cast<std::ptrdiff_t>(first + count));
  }
  return out;
}

FactorReturnSeries oos_factor_returns(const EstimationPanel& data, const RestrictionMask& mask,
                                      const OosOptions& options) {
  const std::size_t T = data.month_dates.size();
  if (options.burn_in < 3) throw PreconditionError("OOS burn-in must be at least 3 months");
  if (T <= options.burn_in) {
    throw PreconditionError("panel has " + std::to_string(T) + " months; burn-in is " +
                            std::to_string(options.burn_in));
  }
  const std::size_t n_oos = T - options.burn_in;
  const Eigen::Index J = mask.free.cols();
  FactorReturnSeries out;
  out.names = mask.factor_names;
  out.F.resize(ix(n_oos), J);
  out.dates.resize(n_oos);
  if (options.keep_weights) out.weight_snapshots.resize(n_oos);

  // Month t (1-based) = burn_in + k: fit on periods [0, t-1), realize period t-1.
  auto one = [&](std::size_t k, const std::optional<Eigen::MatrixXd>& init) {
    const std::size_t t = options.burn_in + k;
    FitOptions fo = options.fit;
    fo.init_gamma = init;
    FittedModel model = fit(data, 0, t - 1, mask, fo);
    const Period& p = data.periods[t - 1];
    const Eigen::MatrixXd W = factor_weights(model.Gamma, p.Z, p.w, p.instrument_date, fo.ridge);
    out.F.row(ix(k)) = (W * p.r).transpose();
    out.dates[k] = p.return_date;
    if (options.keep_weights) out.weight_snapshots[k] = W;
    return model.Gamma;
  };

  if (options.warm_start) {
    std::optional<Eigen::MatrixXd> prev = options.fit.init_gamma;
    for (std::size_t k = 0; k < n_oos; ++k) prev = one(k, prev);
  } else {
    parallel_for(n_oos, options.jobs, [&](std::size_t k) { one(k, options.fit.init_gamma); });
  }
  return out;
}

}  // namespace cipca
