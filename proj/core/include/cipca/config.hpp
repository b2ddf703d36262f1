#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cipca/panel.hpp"

namespace cipca {

enum class RestrictionMode { kIC, kDC, kPDC, kRC, kIPCA };
enum class SelectionMode { kOrdered, kBayes, kBoth, kNone };

RestrictionMode parse_restriction_mode(const std::string& s);
std::string to_string(RestrictionMode m);
SelectionMode parse_selection_mode(const std::string& s);
std::string to_string(SelectionMode m);

// Flat "section.key" -> value map of a TOML-style file. Supported syntax:
// [section] headers, key = value pairs, '#' comments, double-quoted strings,
// and [a, b, c] arrays (stored as the comma-joined text).
using ConfigMap = std::map<std::string, std::string>;
ConfigMap parse_config_text(const std::string& text);
// Applies "section.key=value" overrides.
void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides);

struct RunConfig {
  // [input]
  std::string panel;
  std::string prior;       // partition CSV; required for ic and dc
  std::string benchmarks;  // optional date,<factors...> CSV
  PanelSchema schema;      // [schema]

  // [run]
  std::string out = "out";  // load_config resolves it against the config directory
  RestrictionMode mode = RestrictionMode::kDC;
  WeightScheme weights = WeightScheme::kValue;
  double price_floor = kDefaultPriceFloor;
  ImputePolicy impute = ImputePolicy::kZero;
  std::size_t train_months = 180;
  std::size_t oos_burn_in = 0;  // 0: equals train_months
  std::uint64_t seed = 1;
  unsigned jobs = 0;  // 0: all cores; never affects outputs

  // [clustering]
  std::vector<int> knn_grid = {10, 15, 20};
  std::vector<int> m_grid = {4, 6, 8};
  double f = 1e3;
  double eta = 1.3;
  int K_max = 15;
  int K = 0;  // random partition size (rc)

  // [fit]
  int ipca_factors = 5;  // ipca mode
  double tol = 1e-8;
  int max_iter = 1000;
  bool ridge = false;
  bool warm_start = true;

  // [evaluation]
  std::size_t tangency_burn_in = 60;
  std::size_t grid_factor_burn_in = 0;
  int nw_lags = -1;
  bool tangency_ridge = false;

  // [selection]
  SelectionMode selection = SelectionMode::kBoth;
  double tr = 0.1;
  std::optional<double> sh2max;
  std::size_t top_n = 10;

  // [embedding]
  bool embed = true;
  double mds_tol = 1e-9;
  int mds_max_iter = 2000;

  // Directory of the configuration file; relative input paths resolve against it.
  std::string base_dir;
  std::string resolve(const std::string& path) const;

  std::size_t effective_oos_burn_in() const { return oos_burn_in ? oos_burn_in : train_months; }
  unsigned effective_jobs() const;

  // Key/value text that determines all numeric outputs (jobs excluded).
  ConfigMap to_map() const;
  std::string canonical_text() const;

  // Input files exist and mode combinations are valid.
  void validate() const;
};

// Unknown keys and malformed values raise ConfigError.
RunConfig config_from_map(const ConfigMap& map);
RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {});

}  // namespace cipca
