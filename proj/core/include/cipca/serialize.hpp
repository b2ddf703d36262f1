#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "cipca/bayes.hpp"
#include "cipca/clustering.hpp"
#include "cipca/embedding.hpp"
#include "cipca/evaluation.hpp"
#include "cipca/factor_model.hpp"
#include "cipca/hyperparams.hpp"
#include "cipca/similarity.hpp"

// Artifact formats. CSV is RFC 4180 with CRLF records; JSON is pretty-printed
// with sorted keys. Doubles use the shortest round-trip representation, so
// identical values always produce identical bytes.
namespace cipca::io {

// Square labelled matrix: header "characteristic,<names...>", one row per name.
void write_named_matrix_csv(std::ostream& out, const std::vector<std::string>& names,
                            const Eigen::MatrixXd& M);
void read_named_matrix_csv(const std::string& path, std::vector<std::string>& names, Eigen::MatrixXd& M);

void write_similarity_json(std::ostream& out, const SimilarityMatrix& S);
SimilarityMatrix read_similarity(const std::string& similarity_csv, const std::string& rho_csv);

// characteristic,cluster,label. Reading accepts any cluster token (numbers or
// names); clusters are numbered by first appearance and then canonicalized.
void write_partition_csv(std::ostream& out, const Partition& p, const std::vector<std::string>& names);
Partition read_partition_csv(const std::string& path, const std::vector<std::string>& names);

void write_merge_trace_json(std::ostream& out, const MergeTrace& trace, const SelectKResult& selection,
                            const std::vector<std::string>& names);

void write_grid_csv(std::ostream& out, const std::vector<GridCell>& cells);

void write_model_json(std::ostream& out, const FittedModel& model, const RestrictionMask& mask,
                      const std::vector<std::string>& char_names, const StationarityResiduals& stationarity);
// Gamma and mask (with factor names) from model.json.
void read_model_json(const std::string& path, Eigen::MatrixXd& Gamma, RestrictionMask& mask);

// date,<factor names...>
void write_factors_csv(std::ostream& out, const std::vector<int>& dates,
                       const std::vector<std::string>& names, const Eigen::MatrixXd& F);
FactorReturnSeries read_factors_csv(const std::string& path);

void write_tangency_csv(std::ostream& out, const TangencyResult& result, const std::vector<std::string>& names);

// factor,mean,sd,sharpe,mdd (percent units)
void write_factor_stats_csv(std::ostream& out, const std::vector<std::string>& names,
                            const std::vector<FactorStats>& stats);

struct OrderedRow {
  int J = 0;
  std::string added;
  std::vector<std::string> factors;
  double train_sharpe = 0;
  double oos_sharpe = 0;
};
void write_ordered_csv(std::ostream& out, const std::vector<OrderedRow>& rows);

void write_bayes_csv(std::ostream& out, const std::vector<ModelPosterior>& ranked,
                     const std::vector<std::string>& names);
void write_bayes_json(std::ostream& out, const BayesResult& result, const std::vector<std::string>& names,
                      std::size_t top_n, double tr);

void write_embedding_csv(std::ostream& out, const Embedding& e, const Partition* clusters,
                         const Partition* prior);

void write_alphas_csv(std::ostream& out, const std::vector<std::string>& factors,
                      const std::vector<AlphaReport>& reports, const std::vector<std::string>& bench_names);

// Writes `content` to `path` only through a temporary file + rename.
void write_file_atomic(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string sha256_hex(const std::string& bytes);

}  // namespace cipca::io
