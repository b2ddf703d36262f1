#include "cipca/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include "cipca/bayes.hpp"
#include "cipca/clustering.hpp"
#include "cipca/csv.hpp"
#include "cipca/embedding.hpp"
#include "cipca/error.hpp"
#include "cipca/evaluation.hpp"
#include "cipca/factor_model.hpp"
#include "cipca/hyperparams.hpp"
#include "cipca/serialize.hpp"
#include "cipca/similarity.hpp"
#include "json.hpp"
#include "log.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace cipca {

std::string library_version() { return CIPCA_VERSION; }

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"ingest", "similarity", "cluster", "fit", "oos",
                                                 "tangency", "select-ordered", "select-bayes", "embed"};
  return names;
}

namespace {

class SkipStage : public std::exception {};

class Workspace {
 public:
  explicit Workspace(const RunConfig& c) : cfg_(c), dir_(c.out) {}

  std::string path(const std::string& file) const { return (dir_ / file).string(); }
  bool has(const std::string& file) const { return fs::is_regular_file(dir_ / file); }

  void write(const std::string& file, const std::string& content, std::vector<std::string>& artifacts) {
    io::write_file_atomic(path(file), content);
    artifacts.push_back(file);
  }

  const CharacteristicPanel& panel() {
    if (!panel_) {
      if (has("panel.csv")) {
        panel_ = load_panel(path("panel.csv"));
      } else {
        panel_ = load_panel(cfg_.resolve(cfg_.panel), cfg_.schema);
      }
    }
    return *panel_;
  }
  void set_panel(CharacteristicPanel p) {
    panel_ = std::move(p);
    reset_derived();
  }

  const std::vector<std::string>& names() { return panel().char_names; }
  std::size_t train_months() { return std::min(cfg_.train_months, panel().num_months()); }

  const WeightSeries& weights() {
    if (!weights_) weights_ = build_weights(panel(), cfg_.weights, cfg_.price_floor);
    return *weights_;
  }

  const EstimationPanel& estimation() {
    if (!estimation_) estimation_ = make_estimation_panel(panel(), standardize(panel(), cfg_.impute), weights());
    return *estimation_;
  }

  // Months 1..train: periods whose return month lies in the training window.
  const EstimationPanel& train_estimation() {
    if (!train_) {
      const std::size_t months = train_months();
      if (months < 3) throw PreconditionError("training window needs at least 3 months");
      EstimationPanel e;
      const auto& full = estimation();
      e.month_dates.assign(full.month_dates.begin(), full.month_dates.begin() + static_cast<std::ptrdiff_t>(months));
      e.periods.assign(full.periods.begin(), full.periods.begin() + static_cast<std::ptrdiff_t>(months - 1));
      train_ = std::move(e);
    }
    return *train_;
  }

  const SimilarityMatrix& similarity() {
    if (!similarity_) {
      if (has("similarity.csv") && has("rho.csv")) {
        similarity_ = io::read_similarity(path("similarity.csv"), path("rho.csv"));
        if (similarity_->names != names()) throw ValidationError("similarity.csv does not match the panel");
      } else {
        throw PreconditionError("similarity artifacts missing; run the similarity stage first");
      }
    }
    return *similarity_;
  }
  void set_similarity(SimilarityMatrix s) { similarity_ = std::move(s); }

  const Partition& prior() {
    if (!prior_) {
      prior_ = cfg_.prior.empty() ? Partition::single(names().size())
                                  : io::read_partition_csv(cfg_.resolve(cfg_.prior), names());
    }
    return *prior_;
  }

  const Partition& partition() {
    if (!partition_) {
      if (!has("partition.csv")) throw PreconditionError("partition.csv missing; run the cluster stage first");
      partition_ = io::read_partition_csv(path("partition.csv"), names());
    }
    return *partition_;
  }
  void set_partition(Partition p) { partition_ = std::move(p); }

  RestrictionMask mask() {
    if (cfg_.mode == RestrictionMode::kIPCA) {
      return RestrictionMask::unrestricted(names().size(), cfg_.ipca_factors);
    }
    return restriction_mask_from_partition(partition(), true);
  }

  FitOptions fit_options() const {
    FitOptions fo;
    fo.tol = cfg_.tol;
    fo.max_iter = cfg_.max_iter;
    fo.ridge = cfg_.ridge;
    return fo;
  }

  TangencyOptions tangency_options() const {
    TangencyOptions to;
    to.burn_in = cfg_.tangency_burn_in;
    to.ridge = cfg_.tangency_ridge;
    return to;
  }

  FactorReturnSeries series(const std::string& file) {
    auto& slot = series_[file];
    if (!slot) {
      if (!has(file)) throw PreconditionError(file + " missing; run the stage that produces it first");
      slot = io::read_factors_csv(path(file));
    }
    return *slot;
  }
  void set_series(const std::string& file, FactorReturnSeries s) { series_[file] = std::move(s); }

  const RunConfig& config() const { return cfg_; }

 private:
  void reset_derived() {
    weights_.reset();
    estimation_.reset();
    train_.reset();
  }

  const RunConfig& cfg_;
  fs::path dir_;
  std::optional<CharacteristicPanel> panel_;
  std::optional<WeightSeries> weights_;
  std::optional<EstimationPanel> estimation_;
  std::optional<EstimationPanel> train_;
  std::optional<SimilarityMatrix> similarity_;
  std::optional<Partition> prior_;
  std::optional<Partition> partition_;
  std::map<std::string, std::optional<FactorReturnSeries>> series_;
};

template <typename Fn>
std::string render(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

void stage_ingest(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  CharacteristicPanel p = load_panel(c.resolve(c.panel), c.schema);
  if (p.num_months() < 2) throw ValidationError("panel needs at least two months");
  ws.set_panel(std::move(p));
  ws.write("panel.csv", render([&](std::ostream& s) { write_panel_csv(s, ws.panel()); }), out);
}

void stage_similarity(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  const RankPanel ranks = rank_transform(ws.panel());
  SimilarityMatrix S = similarity_matrix(ranks, ws.weights(), ws.names(), MonthWindow{0, ws.train_months()},
                                         c.effective_jobs());
  const DistanceMatrix D = to_distance(S);
  ws.write("similarity.csv", render([&](std::ostream& s) { io::write_named_matrix_csv(s, S.names, S.S); }), out);
  ws.write("rho.csv", render([&](std::ostream& s) { io::write_named_matrix_csv(s, S.names, S.rho); }), out);
  ws.write("distance.csv", render([&](std::ostream& s) { io::write_named_matrix_csv(s, D.names, D.D); }), out);
  ws.write("similarity.json", render([&](std::ostream& s) { io::write_similarity_json(s, S); }), out);
  ws.set_similarity(std::move(S));
}

void stage_cluster(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  const auto& names = ws.names();
  Partition p;
  switch (c.mode) {
    case RestrictionMode::kIPCA:
      throw SkipStage();
    case RestrictionMode::kIC:
      p = ws.prior();
      break;
    case RestrictionMode::kRC:
      p = random_partition(names.size(), c.K, c.seed);
      break;
    case RestrictionMode::kDC:
    case RestrictionMode::kPDC: {
      GridSpec grid{c.knn_grid, c.m_grid, c.f, c.eta, c.K_max};
      GridOptions go;
      go.constrained = c.mode == RestrictionMode::kDC;
      go.factor_burn_in = c.grid_factor_burn_in;
      go.tangency = ws.tangency_options();
      go.fit = ws.fit_options();
      go.jobs = c.effective_jobs();
      const Partition prior = go.constrained ? ws.prior() : Partition::single(names.size());
      GridResult g = grid_search(ws.train_estimation(), ws.similarity(), prior, grid, go);
      log::info("grid search picked m={} knn={} K={}", g.best.m, g.best.knn, g.best.K);
      ws.write("merge_trace.json", render([&](std::ostream& s) {
                 io::write_merge_trace_json(s, g.clustering.trace, g.clustering.selection, names);
               }), out);
      ws.write("grid.csv", render([&](std::ostream& s) { io::write_grid_csv(s, g.cells); }), out);
      p = g.clustering.partition;
      break;
    }
  }
  ws.write("partition.csv", render([&](std::ostream& s) { io::write_partition_csv(s, p, names); }), out);
  ws.set_partition(std::move(p));
}

void stage_fit(Workspace& ws, std::vector<std::string>& out) {
  const auto& train = ws.train_estimation();
  const RestrictionMask mask = ws.mask();
  const FittedModel model = fit(train, mask, ws.fit_options());
  const auto st = stationarity_residuals(train, 0, train.periods.size(), mask, model.Gamma, model.factors);
  ws.write("model.json", render([&](std::ostream& s) { io::write_model_json(s, model, mask, ws.names(), st); }), out);
  ws.write("factors.csv", render([&](std::ostream& s) {
             io::write_factors_csv(s, model.return_dates, mask.factor_names, model.factors);
           }), out);
  FactorReturnSeries F;
  F.dates = model.return_dates;
  F.names = mask.factor_names;
  F.F = model.factors;
  ws.set_series("factors.csv", std::move(F));
}

void stage_oos(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  const RestrictionMask mask = ws.mask();
  OosOptions oo;
  oo.burn_in = c.effective_oos_burn_in();
  oo.fit = ws.fit_options();
  oo.warm_start = c.warm_start;
  oo.jobs = c.effective_jobs();
  FactorReturnSeries F = oos_factor_returns(ws.estimation(), mask, oo);
  ws.write("oos_factors.csv", render([&](std::ostream& s) { io::write_factors_csv(s, F.dates, F.names, F.F); }), out);
  ws.set_series("oos_factors.csv", std::move(F));
}

void stage_tangency(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  const FactorReturnSeries F = ws.series("oos_factors.csv");
  const TangencyResult t = tangency_backtest(F, ws.tangency_options());
  ws.write("tangency.csv", render([&](std::ostream& s) { io::write_tangency_csv(s, t, F.names); }), out);
  std::vector<std::string> names = F.names;
  std::vector<FactorStats> stats;
  for (Eigen::Index j = 0; j < F.F.cols(); ++j) stats.push_back(factor_stats(F.F.col(j)));
  names.push_back("tangency");
  stats.push_back(factor_stats(t.returns));
  ws.write("factor_stats.csv", render([&](std::ostream& s) { io::write_factor_stats_csv(s, names, stats); }), out);

  if (!c.benchmarks.empty()) {
    const FactorReturnSeries B = io::read_factors_csv(c.resolve(c.benchmarks));
    std::map<int, Eigen::Index> row_of;
    for (std::size_t r = 0; r < B.dates.size(); ++r) row_of[B.dates[r]] = static_cast<Eigen::Index>(r);
    std::vector<Eigen::Index> fr, br;
    for (std::size_t r = 0; r < F.dates.size(); ++r) {
      const auto it = row_of.find(F.dates[r]);
      if (it != row_of.end()) {
        fr.push_back(static_cast<Eigen::Index>(r));
        br.push_back(it->second);
      }
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(br.size()), B.F.cols());
    for (std::size_t r = 0; r < br.size(); ++r) X.row(static_cast<Eigen::Index>(r)) = B.F.row(br[r]);
    std::vector<AlphaReport> reports;
    for (Eigen::Index j = 0; j < F.F.cols(); ++j) {
      Eigen::VectorXd y(static_cast<Eigen::Index>(fr.size()));
      for (std::size_t r = 0; r < fr.size(); ++r) y(static_cast<Eigen::Index>(r)) = F.F(fr[r], j);
      reports.push_back(alpha_regression(y, X, c.nw_lags));
    }
    ws.write("alphas.csv", render([&](std::ostream& s) { io::write_alphas_csv(s, F.names, reports, B.names); }), out);
  }
}

// Market column: the intercept-only factor when present, otherwise the factor
// most correlated with the weighted cross-sectional mean return.
int market_column(Workspace& ws, const FactorReturnSeries& train) {
  const auto it = std::find(train.names.begin(), train.names.end(), "ZC");
  if (it != train.names.end()) return static_cast<int>(it - train.names.begin());
  const auto& e = ws.train_estimation();
  Eigen::VectorXd mkt(static_cast<Eigen::Index>(e.periods.size()));
  for (std::size_t p = 0; p < e.periods.size(); ++p) mkt(static_cast<Eigen::Index>(p)) = e.periods[p].w.dot(e.periods[p].r);
  int best = 0;
  double best_corr = -2;
  const Eigen::VectorXd m = mkt.array() - mkt.mean();
  for (Eigen::Index j = 0; j < train.F.cols(); ++j) {
    const Eigen::VectorXd f = train.F.col(j).array() - train.F.col(j).mean();
    const double corr = f.dot(m) / std::max(f.norm() * m.norm(), 1e-300);
    if (corr > best_corr) {
      best_corr = corr;
      best = static_cast<int>(j);
    }
  }
  return best;
}

void stage_select_ordered(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  if (c.selection != SelectionMode::kOrdered && c.selection != SelectionMode::kBoth) throw SkipStage();
  const FactorReturnSeries train = ws.series("factors.csv");
  const FactorReturnSeries oos = ws.series("oos_factors.csv");
  if (train.names != oos.names) throw ValidationError("factors.csv and oos_factors.csv name different factors");
  const OrderedSelection sel = ordered_selection(train.F, market_column(ws, train));
  std::vector<io::OrderedRow> rows;
  for (std::size_t J = 1; J <= sel.order.size(); ++J) {
    const auto cols = sel.model(J);
    io::OrderedRow row;
    row.J = static_cast<int>(J);
    row.added = oos.names[static_cast<std::size_t>(cols.back())];
    for (int col : cols) row.factors.push_back(oos.names[static_cast<std::size_t>(col)]);
    row.train_sharpe = sel.train_sharpe[static_cast<std::size_t>(cols.back())];
    row.oos_sharpe = tangency_backtest(oos.select(cols), ws.tangency_options()).sharpe;
    rows.push_back(std::move(row));
  }
  ws.write("ordered.csv", render([&](std::ostream& s) { io::write_ordered_csv(s, rows); }), out);
}

void stage_select_bayes(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  if (c.selection != SelectionMode::kBayes && c.selection != SelectionMode::kBoth) throw SkipStage();
  const FactorReturnSeries F = ws.series("oos_factors.csv");
  BayesOptions bo;
  bo.tr = c.tr;
  bo.sh2max = c.sh2max;
  bo.top_n = c.top_n;
  bo.jobs = c.effective_jobs();
  const BayesResult r = posterior_rank(F.F, bo);
  ws.write("bayes.csv", render([&](std::ostream& s) { io::write_bayes_csv(s, r.top(c.top_n), F.names); }), out);
  ws.write("bayes.json", render([&](std::ostream& s) { io::write_bayes_json(s, r, F.names, c.top_n, c.tr); }), out);
}

void stage_embed(Workspace& ws, std::vector<std::string>& out) {
  const RunConfig& c = ws.config();
  if (!c.embed) throw SkipStage();
  DistanceMatrix D;
  if (ws.has("distance.csv")) {
    io::read_named_matrix_csv(ws.path("distance.csv"), D.names, D.D);
  } else {
    D = to_distance(ws.similarity());
  }
  MdsOptions mo;
  mo.tol = c.mds_tol;
  mo.max_iter = c.mds_max_iter;
  mo.seed = c.seed;
  const Embedding e = mds_embed(D, mo);
  std::optional<Partition> clusters;
  if (c.mode != RestrictionMode::kIPCA && ws.has("partition.csv")) clusters = ws.partition();
  std::optional<Partition> prior;
  if (!c.prior.empty()) prior = ws.prior();
  ws.write("embedding.csv", render([&](std::ostream& s) {
             io::write_embedding_csv(s, e, clusters ? &*clusters : nullptr, prior ? &*prior : nullptr);
           }), out);
}

using StageFn = void (*)(Workspace&, std::vector<std::string>&);

StageFn stage_fn(const std::string& name) {
  static const std::map<std::string, StageFn> table = {
      {"ingest", stage_ingest},       {"similarity", stage_similarity},
      {"cluster", stage_cluster},     {"fit", stage_fit},
      {"oos", stage_oos},             {"tangency", stage_tangency},
      {"select-ordered", stage_select_ordered}, {"select-bayes", stage_select_bayes},
      {"embed", stage_embed}};
  const auto it = table.find(name);
  if (it == table.end()) throw ConfigError("unknown stage '" + name + "'");
  return it->second;
}

std::size_t stage_index(const std::string& name) {
  const auto& names = stage_names();
  return static_cast<std::size_t>(std::find(names.begin(), names.end(), name) - names.begin());
}

json load_manifest(const fs::path& file) {
  if (!fs::is_regular_file(file)) return json::object();
  try {
    json j = json::parse(io::read_file(file.string()));
    if (j.is_object()) return j;
  } catch (const json::exception&) {
  }
  log::warn("ignoring unreadable manifest {}", file.string());
  return json::object();
}

}  // namespace

PipelineResult run_stages(const RunConfig& config, const std::vector<std::string>& stages) {
  config.validate();
  for (const auto& s : stages) stage_fn(s);  // reject unknown names before doing work
  fs::create_directories(config.out);
  const fs::path manifest_path = fs::path(config.out) / "manifest.json";
  json manifest = load_manifest(manifest_path);
  const std::string canonical = config.canonical_text();
  const std::string config_hash = io::sha256_hex(canonical);
  json cfg = json::object();
  for (const auto& [k, v] : config.to_map()) cfg[k] = v;
  manifest["version"] = library_version();
  manifest["config"] = cfg;
  manifest["config_sha256"] = config_hash;
  manifest["seed"] = config.seed;
  if (!manifest.contains("stages") || !manifest["stages"].is_object()) manifest["stages"] = json::object();

  Workspace ws(config);
  PipelineResult result;
  for (const auto& name : stages) {
    StageReport report;
    report.name = name;
    log::info("stage {}", name);
    try {
      stage_fn(name)(ws, report.artifacts);
      report.status = "ok";
    } catch (const SkipStage&) {
      report.status = "skipped";
    } catch (const std::exception& e) {
      report.status = "failed";
      report.error = e.what();
    }
    json entry;
    entry["status"] = report.status;
    entry["config_sha256"] = config_hash;
    json artifacts = json::array();
    for (const auto& file : report.artifacts) {
      artifacts.push_back({{"file", file}, {"sha256", io::sha256_hex(io::read_file(ws.path(file)))}, {"stale", false}});
    }
    entry["artifacts"] = artifacts;
    if (!report.error.empty()) entry["error"] = report.error;
    manifest["stages"][name] = entry;
    result.stages.push_back(report);

    if (report.status == "failed") {
      result.exit_code = 1;
      result.failed_stage = name;
      result.message = report.error;
      // Anything downstream of the failure no longer reflects this configuration.
      const std::size_t failed_at = stage_index(name);
      for (auto& [other, e] : manifest["stages"].items()) {
        if (stage_index(other) < failed_at) continue;
        if (other != name) e["status"] = "stale";
        if (e.contains("artifacts")) {
          for (auto& a : e["artifacts"]) a["stale"] = true;
        }
      }
      break;
    }
  }
  manifest["status"] = result.exit_code == 0 ? "ok" : "failed";
  if (result.exit_code != 0) {
    manifest["failed_stage"] = result.failed_stage;
    manifest["error"] = result.message;
  } else {
    manifest.erase("failed_stage");
    manifest.erase("error");
  }
  io::write_file_atomic(manifest_path.string(), manifest.dump(2) + "\n");
  return result;
}

PipelineResult run_pipeline(const RunConfig& config) { return run_stages(config, stage_names()); }

}  // namespace cipca
