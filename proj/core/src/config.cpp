#include "cipca/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <functional>
#include <sstream>

#include "cipca/csv.hpp"
#include "cipca/error.hpp"
#include "cipca/parallel.hpp"
#include "cipca/serialize.hpp"

namespace cipca {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

// Drops a '#' comment that is not inside double quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    item = unquote(trim(item));
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string parse_value(const std::string& raw, std::size_t line) {
  const std::string v = trim(raw);
  if (v.empty()) throw ConfigError("line " + std::to_string(line) + ": empty value");
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("line " + std::to_string(line) + ": unterminated array");
    const auto items = split_list(v.substr(1, v.size() - 2));
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
  }
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("line " + std::to_string(line) + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  return v;
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  if (!csv::parse_double(v, out) || csv::is_missing(v)) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  for (const auto& item : split_list(v)) out.push_back(parse_integer<int>(key, item));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

RestrictionMode parse_restriction_mode(const std::string& s) {
  if (s == "ic") return RestrictionMode::kIC;
  if (s == "dc") return RestrictionMode::kDC;
  if (s == "pdc") return RestrictionMode::kPDC;
  if (s == "rc") return RestrictionMode::kRC;
  if (s == "ipca") return RestrictionMode::kIPCA;
  throw ConfigError("unknown mode '" + s + "' (expected ic, dc, pdc, rc or ipca)");
}

std::string to_string(RestrictionMode m) {
  switch (m) {
    case RestrictionMode::kIC: return "ic";
    case RestrictionMode::kDC: return "dc";
    case RestrictionMode::kPDC: return "pdc";
    case RestrictionMode::kRC: return "rc";
    case RestrictionMode::kIPCA: return "ipca";
  }
  return "?";
}

SelectionMode parse_selection_mode(const std::string& s) {
  if (s == "ordered") return SelectionMode::kOrdered;
  if (s == "bayes") return SelectionMode::kBayes;
  if (s == "both") return SelectionMode::kBoth;
  if (s == "none") return SelectionMode::kNone;
  throw ConfigError("unknown selection mode '" + s + "' (expected ordered, bayes, both or none)");
}

std::string to_string(SelectionMode m) {
  switch (m) {
    case SelectionMode::kOrdered: return "ordered";
    case SelectionMode::kBayes: return "bayes";
    case SelectionMode::kBoth: return "both";
    case SelectionMode::kNone: return "none";
  }
  return "?";
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::istringstream in(text);
  std::string line, section;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(n) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(n) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(n) + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (out.count(full)) throw ConfigError("line " + std::to_string(n) + ": duplicate key '" + full + "'");
    out[full] = parse_value(s.substr(eq + 1), n);
  }
  return out;
}

void apply_overrides(ConfigMap& map, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + o + "' is not key=value");
    map[trim(o.substr(0, eq))] = parse_value(o.substr(eq + 1), 0);
  }
}

std::string RunConfig::resolve(const std::string& p) const {
  if (p.empty() || base_dir.empty() || std::filesystem::path(p).is_absolute()) return p;
  return (std::filesystem::path(base_dir) / p).lexically_normal().string();
}

unsigned RunConfig::effective_jobs() const { return jobs ? jobs : default_jobs(); }

ConfigMap RunConfig::to_map() const {
  ConfigMap m;
  m["input.panel"] = panel;
  m["input.prior"] = prior;
  m["input.benchmarks"] = benchmarks;
  m["schema.date"] = schema.date;
  m["schema.asset"] = schema.asset;
  m["schema.ret"] = schema.ret;
  m["schema.mktcap"] = schema.mktcap;
  m["schema.price"] = schema.price;
  std::string chars;
  for (std::size_t i = 0; i < schema.characteristics.size(); ++i) chars += (i ? "," : "") + schema.characteristics[i];
  m["schema.characteristics"] = chars;
  m["run.mode"] = to_string(mode);
  m["run.weights"] = to_string(weights);
  m["run.price_floor"] = csv::format_double(price_floor);
  m["run.impute"] = impute == ImputePolicy::kZero ? "zero" : "median";
  m["run.train_months"] = std::to_string(train_months);
  m["run.oos_burn_in"] = std::to_string(oos_burn_in);
  m["run.seed"] = std::to_string(seed);
  m["clustering.knn"] = join_ints(knn_grid);
  m["clustering.m"] = join_ints(m_grid);
  m["clustering.f"] = csv::format_double(f);
  m["clustering.eta"] = csv::format_double(eta);
  m["clustering.K_max"] = std::to_string(K_max);
  m["clustering.K"] = std::to_string(K);
  m["fit.ipca_factors"] = std::to_string(ipca_factors);
  m["fit.tol"] = csv::format_double(tol);
  m["fit.max_iter"] = std::to_string(max_iter);
  m["fit.ridge"] = bool_text(ridge);
  m["fit.warm_start"] = bool_text(warm_start);
  m["evaluation.tangency_burn_in"] = std::to_string(tangency_burn_in);
  m["evaluation.grid_factor_burn_in"] = std::to_string(grid_factor_burn_in);
  m["evaluation.nw_lags"] = std::to_string(nw_lags);
  m["evaluation.tangency_ridge"] = bool_text(tangency_ridge);
  m["selection.mode"] = to_string(selection);
  m["selection.tr"] = csv::format_double(tr);
  m["selection.sh2max"] = sh2max ? csv::format_double(*sh2max) : "";
  m["selection.top_n"] = std::to_string(top_n);
  m["embedding.enabled"] = bool_text(embed);
  m["embedding.tol"] = csv::format_double(mds_tol);
  m["embedding.max_iter"] = std::to_string(mds_max_iter);
  return m;
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + "=" + v + "\n";
  return out;
}

RunConfig config_from_map(const ConfigMap& map) {
  RunConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"input.panel", [&](auto&, auto& v) { c.panel = v; }},
      {"input.prior", [&](auto&, auto& v) { c.prior = v; }},
      {"input.benchmarks", [&](auto&, auto& v) { c.benchmarks = v; }},
      {"schema.date", [&](auto&, auto& v) { c.schema.date = v; }},
      {"schema.asset", [&](auto&, auto& v) { c.schema.asset = v; }},
      {"schema.ret", [&](auto&, auto& v) { c.schema.ret = v; }},
      {"schema.mktcap", [&](auto&, auto& v) { c.schema.mktcap = v; }},
      {"schema.price", [&](auto&, auto& v) { c.schema.price = v; }},
      {"schema.characteristics", [&](auto&, auto& v) { c.schema.characteristics = split_list(v); }},
      {"run.out", [&](auto&, auto& v) { c.out = v; }},
      {"run.mode", [&](auto&, auto& v) { c.mode = parse_restriction_mode(v); }},
      {"run.weights", [&](auto& k, auto& v) {
         try {
           c.weights = parse_weight_scheme(v);
         } catch (const Error&) {
           throw ConfigError(k + ": expected value or equal, got '" + v + "'");
         }
       }},
      {"run.price_floor", [&](auto& k, auto& v) { c.price_floor = parse_real(k, v); }},
      {"run.impute", [&](auto& k, auto& v) {
         if (v == "zero") c.impute = ImputePolicy::kZero;
         else if (v == "median") c.impute = ImputePolicy::kMedian;
         else throw ConfigError(k + ": expected zero or median");
       }},
      {"run.train_months", [&](auto& k, auto& v) { c.train_months = parse_integer<std::size_t>(k, v); }},
      {"run.oos_burn_in", [&](auto& k, auto& v) { c.oos_burn_in = parse_integer<std::size_t>(k, v); }},
      {"run.seed", [&](auto& k, auto& v) { c.seed = parse_integer<std::uint64_t>(k, v); }},
      {"run.jobs", [&](auto& k, auto& v) { c.jobs = parse_integer<unsigned>(k, v); }},
      {"clustering.knn", [&](auto& k, auto& v) { c.knn_grid = parse_int_list(k, v); }},
      {"clustering.m", [&](auto& k, auto& v) { c.m_grid = parse_int_list(k, v); }},
      {"clustering.f", [&](auto& k, auto& v) { c.f = parse_real(k, v); }},
      {"clustering.eta", [&](auto& k, auto& v) { c.eta = parse_real(k, v); }},
      {"clustering.K_max", [&](auto& k, auto& v) { c.K_max = parse_integer<int>(k, v); }},
      {"clustering.K", [&](auto& k, auto& v) { c.K = parse_integer<int>(k, v); }},
      {"fit.ipca_factors", [&](auto& k, auto& v) { c.ipca_factors = parse_integer<int>(k, v); }},
      {"fit.tol", [&](auto& k, auto& v) { c.tol = parse_real(k, v); }},
      {"fit.max_iter", [&](auto& k, auto& v) { c.max_iter = parse_integer<int>(k, v); }},
      {"fit.ridge", [&](auto& k, auto& v) { c.ridge = parse_bool(k, v); }},
      {"fit.warm_start", [&](auto& k, auto& v) { c.warm_start = parse_bool(k, v); }},
      {"evaluation.tangency_burn_in", [&](auto& k, auto& v) { c.tangency_burn_in = parse_integer<std::size_t>(k, v); }},
      {"evaluation.grid_factor_burn_in", [&](auto& k, auto& v) { c.grid_factor_burn_in = parse_integer<std::size_t>(k, v); }},
      {"evaluation.nw_lags", [&](auto& k, auto& v) { c.nw_lags = parse_integer<int>(k, v); }},
      {"evaluation.tangency_ridge", [&](auto& k, auto& v) { c.tangency_ridge = parse_bool(k, v); }},
      {"selection.mode", [&](auto&, auto& v) { c.selection = parse_selection_mode(v); }},
      {"selection.tr", [&](auto& k, auto& v) { c.tr = parse_real(k, v); }},
      {"selection.sh2max", [&](auto& k, auto& v) {
         if (v.empty()) c.sh2max.reset();
         else c.sh2max = parse_real(k, v);
       }},
      {"selection.top_n", [&](auto& k, auto& v) { c.top_n = parse_integer<std::size_t>(k, v); }},
      {"embedding.enabled", [&](auto& k, auto& v) { c.embed = parse_bool(k, v); }},
      {"embedding.tol", [&](auto& k, auto& v) { c.mds_tol = parse_real(k, v); }},
      {"embedding.max_iter", [&](auto& k, auto& v) { c.mds_max_iter = parse_integer<int>(k, v); }},
  };
  for (const auto& [key, value] : map) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown configuration key '" + key + "'");
    it->second(key, value);
  }
  return c;
}

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error&) {
    throw ConfigError("cannot read configuration file " + path);
  }
  ConfigMap map = parse_config_text(text);
  apply_overrides(map, overrides);
  RunConfig c = config_from_map(map);
  c.base_dir = std::filesystem::path(path).parent_path().string();
  c.out = c.resolve(c.out);
  return c;
}

void RunConfig::validate() const {
  if (panel.empty()) throw ConfigError("input.panel is required");
  for (const auto* p : {&panel, &prior, &benchmarks}) {
    if (!p->empty() && !std::filesystem::is_regular_file(resolve(*p))) {
      throw ConfigError("input file not found: " + resolve(*p));
    }
  }
  if ((mode == RestrictionMode::kIC || mode == RestrictionMode::kDC) && prior.empty()) {
    throw ConfigError("modes ic and dc need input.prior");
  }
  if (mode == RestrictionMode::kRC && K < 1) throw ConfigError("mode rc needs clustering.K >= 1");
  if (mode == RestrictionMode::kIPCA && ipca_factors < 1) throw ConfigError("fit.ipca_factors must be >= 1");
  if (train_months < 3) throw ConfigError("run.train_months must be at least 3");
  if (!(f > 1) || !(eta > 1)) throw ConfigError("clustering.f and clustering.eta must exceed 1");
  if (!(tr > 0 && tr < 1)) throw ConfigError("selection.tr must lie in (0, 1)");
  for (int k : knn_grid) {
    if (k < 1) throw ConfigError("clustering.knn entries must be >= 1");
  }
  for (int m : m_grid) {
    if (m < 1) throw ConfigError("clustering.m entries must be >= 1");
  }
}

}  // namespace cipca
