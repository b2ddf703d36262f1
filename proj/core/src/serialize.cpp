#include "cipca/serialize.hpp"

#include <openssl/evp.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cipca/csv.hpp"
#include "cipca/error.hpp"
#include "json.hpp"

namespace cipca::io {

using nlohmann::json;

namespace {

Eigen::Index ix(std::size_t i) { return static_cast<Eigen::Index>(i); }

// Non-finite values become the strings "inf", "-inf", "nan".
json number(double v) {
  if (std::isfinite(v)) return v;
  return csv::format_double(v);
}

json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(number(M(r, c)));
    rows.push_back(std::move(row));
  }
  return rows;
}

double read_number(const json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    double out = 0;
    if (csv::parse_double(v.get<std::string>(), out)) return out;
  }
  throw ParseError(0, "expected a number in JSON artifact");
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double cell(const csv::Table& t, std::size_t r, std::size_t c) {
  double v = 0;
  if (!csv::parse_double(t.rows[r][c], v)) {
    throw ParseError(t.line_numbers[r], "not a number: '" + t.rows[r][c] + "'");
  }
  return v;
}

long require_column(const csv::Table& t, const std::string& name, const std::string& path) {
  const long c = t.column(name);
  if (c < 0) throw ValidationError(path + ": missing column '" + name + "'");
  return c;
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? sep : "") + parts[i];
  return out;
}

}  // namespace

void write_named_matrix_csv(std::ostream& out, const std::vector<std::string>& names,
                            const Eigen::MatrixXd& M) {
  csv::Row header = {"characteristic"};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(out, header);
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    csv::Row row = {names[static_cast<std::size_t>(r)]};
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(csv::format_double(M(r, c)));
    csv::write_row(out, row);
  }
}

void read_named_matrix_csv(const std::string& path, std::vector<std::string>& names, Eigen::MatrixXd& M) {
  const csv::Table t = csv::read_file(path);
  if (t.header.size() < 2) throw ValidationError(path + ": matrix needs a header");
  names.assign(t.header.begin() + 1, t.header.end());
  if (t.rows.size() != names.size()) throw ValidationError(path + ": matrix is not square");
  M.resize(ix(names.size()), ix(names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != names.size() + 1 || t.rows[r][0] != names[r]) {
      throw ParseError(t.line_numbers[r], "row label does not match the header");
    }
    for (std::size_t c = 0; c < names.size(); ++c) M(ix(r), ix(c)) = cell(t, r, c + 1);
  }
}

void write_similarity_json(std::ostream& out, const SimilarityMatrix& S) {
  json j;
  j["names"] = S.names;
  j["S"] = matrix_json(S.S);
  j["rho"] = matrix_json(S.rho);
  out << dump(j);
}

SimilarityMatrix read_similarity(const std::string& similarity_csv, const std::string& rho_csv) {
  SimilarityMatrix S;
  read_named_matrix_csv(similarity_csv, S.names, S.S);
  std::vector<std::string> names;
  read_named_matrix_csv(rho_csv, names, S.rho);
  if (names != S.names) throw ValidationError("similarity and correlation matrices disagree on names");
  return S;
}

void write_partition_csv(std::ostream& out, const Partition& p, const std::vector<std::string>& names) {
  csv::write_row(out, {"characteristic", "cluster", "label"});
  for (std::size_t i = 0; i < p.size(); ++i) {
    const int k = p.assignment[i];
    const std::string label = p.labels.empty() ? "" : p.labels[static_cast<std::size_t>(k)];
    csv::write_row(out, {names[i], std::to_string(k), label});
  }
}

Partition read_partition_csv(const std::string& path, const std::vector<std::string>& names) {
  const csv::Table t = csv::read_file(path);
  const long ccol = require_column(t, "characteristic", path);
  const long kcol = require_column(t, "cluster", path);
  const long lcol = t.column("label");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  std::map<std::string, int> ids;
  std::vector<std::string> labels;
  Partition p;
  p.assignment.assign(names.size(), -1);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const auto it = index.find(row[static_cast<std::size_t>(ccol)]);
    if (it == index.end()) {
      throw ParseError(t.line_numbers[r], "unknown characteristic '" + row[static_cast<std::size_t>(ccol)] + "'");
    }
    if (p.assignment[it->second] >= 0) {
      throw ValidationError(path + ": characteristic '" + it->first + "' listed twice");
    }
    const std::string& token = row[static_cast<std::size_t>(kcol)];
    auto [pos, inserted] = ids.emplace(token, static_cast<int>(ids.size()));
    if (inserted) {
      const std::string label = lcol >= 0 ? row[static_cast<std::size_t>(lcol)] : "";
      double numeric = 0;
      labels.push_back(!label.empty() ? label : (csv::parse_double(token, numeric) ? "" : token));
    }
    p.assignment[it->second] = pos->second;
  }
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (p.assignment[i] < 0) throw ValidationError(path + ": characteristic '" + names[i] + "' has no cluster");
  }
  p.K = static_cast<int>(ids.size());
  bool any_label = false;
  for (const auto& l : labels) any_label = any_label || !l.empty();
  if (any_label) p.labels = labels;
  p.validate();
  return p.canonical();
}

void write_merge_trace_json(std::ostream& out, const MergeTrace& trace, const SelectKResult& selection,
                            const std::vector<std::string>& names) {
  json j;
  json subs = json::array();
  for (const auto& c : trace.basic_subclusters) {
    json members = json::array();
    for (std::size_t v : c) members.push_back(names[v]);
    subs.push_back(members);
  }
  j["basic_subclusters"] = subs;
  json steps = json::array();
  for (const auto& s : trace.steps) {
    steps.push_back({{"cluster_a", s.cluster_a}, {"cluster_b", s.cluster_b},
                     {"max_ris", number(s.max_ris)}, {"resulting_k", s.resulting_k}});
  }
  j["steps"] = steps;
  j["selected_K"] = selection.K;
  j["relaxations"] = selection.relaxations;
  j["relaxation_capped"] = selection.capped;
  out << dump(j);
}

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells) {
  csv::write_row(out, {"m", "knn", "K", "train_sharpe", "error"});
  for (const auto& c : cells) {
    csv::write_row(out, {std::to_string(c.m), std::to_string(c.knn), std::to_string(c.K),
                         csv::format_double(c.sharpe), c.error});
  }
}

void write_model_json(std::ostream& out, const FittedModel& model, const RestrictionMask& mask,
                      const std::vector<std::string>& char_names, const StationarityResiduals& stationarity) {
  json j;
  std::vector<std::string> rows = char_names;
  rows.push_back("intercept");
  j["instruments"] = rows;
  j["factor_names"] = mask.factor_names;
  j["Gamma"] = matrix_json(model.Gamma);
  json m = json::array();
  for (Eigen::Index r = 0; r < mask.free.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < mask.free.cols(); ++c) row.push_back(mask.free(r, c) ? 1 : 0);
    m.push_back(row);
  }
  j["mask"] = m;
  j["dates"] = model.return_dates;
  j["factors"] = matrix_json(model.factors);
  json path = json::array();
  for (double v : model.objective_path) path.push_back(number(v));
  j["objective_path"] = path;
  j["converged"] = model.converged;
  j["iterations"] = model.iterations;
  j["ridge_used"] = model.ridge_used;
  j["stationarity"] = {{"factor", number(stationarity.factor)}, {"gamma", number(stationarity.gamma)}};
  out << dump(j);
}

void read_model_json(const std::string& path, Eigen::MatrixXd& Gamma, RestrictionMask& mask) {
  json j;
  try {
    j = json::parse(read_file(path));
    const auto& g = j.at("Gamma");
    const auto& m = j.at("mask");
    const auto rows = ix(g.size());
    const auto cols = rows > 0 ? ix(g.at(0).size()) : 0;
    Gamma.resize(rows, cols);
    mask.free.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        Gamma(r, c) = read_number(g.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)));
        mask.free(r, c) = m.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(c)).get<int>() != 0;
      }
    }
    mask.factor_names = j.at("factor_names").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw ParseError(0, path + ": " + e.what());
  }
}

void write_factors_csv(std::ostream& out, const std::vector<int>& dates,
                       const std::vector<std::string>& names, const Eigen::MatrixXd& F) {
  csv::Row header = {"date"};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(out, header);
  for (Eigen::Index t = 0; t < F.rows(); ++t) {
    csv::Row row = {std::to_string(dates[static_cast<std::size_t>(t)])};
    for (Eigen::Index j = 0; j < F.cols(); ++j) row.push_back(csv::format_double(F(t, j)));
    csv::write_row(out, row);
  }
}

FactorReturnSeries read_factors_csv(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  if (t.header.size() < 2 || t.header[0] != "date") throw ValidationError(path + ": expected a date column first");
  FactorReturnSeries F;
  F.names.assign(t.header.begin() + 1, t.header.end());
  F.F.resize(ix(t.rows.size()), ix(F.names.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    if (t.rows[r].size() != t.header.size()) throw ParseError(t.line_numbers[r], "wrong field count");
    F.dates.push_back(static_cast<int>(cell(t, r, 0)));
    for (std::size_t j = 0; j < F.names.size(); ++j) F.F(ix(r), ix(j)) = cell(t, r, j + 1);
  }
  return F;
}

void write_tangency_csv(std::ostream& out, const TangencyResult& result, const std::vector<std::string>& names) {
  csv::Row header = {"date", "return", "scale"};
  for (const auto& n : names) header.push_back("w_" + n);
  csv::write_row(out, header);
  for (std::size_t t = 0; t < result.dates.size(); ++t) {
    csv::Row row = {std::to_string(result.dates[t]), csv::format_double(result.returns(ix(t))),
                    csv::format_double(result.scaling_path[t])};
    for (Eigen::Index j = 0; j < result.weights_path[t].size(); ++j) {
      row.push_back(csv::format_double(result.weights_path[t](j)));
    }
    csv::write_row(out, row);
  }
}

void write_factor_stats_csv(std::ostream& out, const std::vector<std::string>& names,
                            const std::vector<FactorStats>& stats) {
  csv::write_row(out, {"factor", "mean", "sd", "sharpe", "mdd"});
  for (std::size_t i = 0; i < stats.size(); ++i) {
    csv::write_row(out, {names[i], csv::format_double(stats[i].mean), csv::format_double(stats[i].sd),
                         csv::format_double(stats[i].sharpe), csv::format_double(stats[i].mdd)});
  }
}

void write_ordered_csv(std::ostream& out, const std::vector<OrderedRow>& rows) {
  csv::write_row(out, {"J", "added", "factors", "train_sharpe", "oos_tangency_sharpe"});
  for (const auto& r : rows) {
    csv::write_row(out, {std::to_string(r.J), r.added, join(r.factors, ";"),
                         csv::format_double(r.train_sharpe), csv::format_double(r.oos_sharpe)});
  }
}

void write_bayes_csv(std::ostream& out, const std::vector<ModelPosterior>& ranked,
                     const std::vector<std::string>& names) {
  csv::write_row(out, {"rank", "model_id", "posterior", "log_evidence", "included_ids", "included"});
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const auto& m = ranked[r];
    std::vector<std::string> ids, labels;
    for (int j : m.spec.included) {
      ids.push_back(std::to_string(j));
      labels.push_back(names[static_cast<std::size_t>(j)]);
    }
    csv::write_row(out, {std::to_string(r + 1), std::to_string(m.spec.id), csv::format_double(m.posterior),
                         csv::format_double(m.log_marginal), join(ids, ";"), join(labels, ";")});
  }
}

void write_bayes_json(std::ostream& out, const BayesResult& result, const std::vector<std::string>& names,
                      std::size_t top_n, double tr) {
  json j;
  j["factors"] = names;
  j["models"] = result.ranked.size();
  j["sh2max"] = number(result.sh2max);
  j["prior_months"] = result.prior_months;
  j["tr"] = tr;
  j["prior"] = "conjugate normal-inverse-Wishart; zero-intercept regression for excluded factors";
  json top = json::array();
  for (const auto& m : result.top(top_n)) {
    std::vector<std::string> labels;
    for (int f : m.spec.included) labels.push_back(names[static_cast<std::size_t>(f)]);
    top.push_back({{"model_id", m.spec.id}, {"posterior", number(m.posterior)},
                   {"log_evidence", number(m.log_marginal)}, {"included_ids", m.spec.included},
                   {"included", labels}});
  }
  j["top"] = top;
  out << dump(j);
}

void write_embedding_csv(std::ostream& out, const Embedding& e, const Partition* clusters,
                         const Partition* prior) {
  csv::write_row(out, {"characteristic", "x", "y", "cluster", "prior"});
  for (std::size_t i = 0; i < e.names.size(); ++i) {
    std::string c, p;
    if (clusters) c = std::to_string(clusters->assignment[i]);
    if (prior) {
      const int k = prior->assignment[i];
      p = prior->labels.empty() ? std::to_string(k) : prior->labels[static_cast<std::size_t>(k)];
    }
    csv::write_row(out, {e.names[i], csv::format_double(e.coords(ix(i), 0)),
                         csv::format_double(e.coords(ix(i), 1)), c, p});
  }
}

void write_alphas_csv(std::ostream& out, const std::vector<std::string>& factors,
                      const std::vector<AlphaReport>& reports, const std::vector<std::string>& bench_names) {
  csv::Row header = {"factor", "alpha", "se_alpha", "tstat_alpha", "nw_lags"};
  for (const auto& b : bench_names) header.push_back("beta_" + b);
  csv::write_row(out, header);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    csv::Row row = {factors[i], csv::format_double(r.alpha), csv::format_double(r.se_alpha),
                    csv::format_double(r.tstat_alpha), std::to_string(r.nw_lags)};
    for (Eigen::Index b = 0; b < r.betas.size(); ++b) row.push_back(csv::format_double(r.betas(b)));
    csv::write_row(out, row);
  }
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp);
    f << content;
    if (!f) throw Error("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

}  // namespace cipca::io
