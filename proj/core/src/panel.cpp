#include "cipca/panel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <tuple>

#include "cipca/csv.hpp"
#include "cipca/error.hpp"

namespace cipca {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int parse_date(std::string_view field, std::size_t line) {
  double v = 0;
  if (!csv::parse_double(field, v) || std::isnan(v) || v != std::floor(v)) {
    throw ParseError(line, "date '" + std::string(field) + "' is not YYYYMM");
  }
  const int date = static_cast<int>(v);
  const int month = date % 100;
  if (date < 100 || month < 1 || month > 12) {
    throw ParseError(line, "date '" + std::string(field) + "' is not YYYYMM");
  }
  return date;
}

double parse_number(const csv::Row& row, long col, std::size_t line, const std::string& name) {
  double v = 0;
  if (!csv::parse_double(row[static_cast<std::size_t>(col)], v)) {
    throw ParseError(line, "column '" + name + "' has non-numeric value '" +
                               row[static_cast<std::size_t>(col)] + "'");
  }
  return v;
}

struct RawRow {
  int date;
  std::string asset;
  double ret, mktcap, price;
  std::vector<double> chars;
};

}  // namespace

std::vector<int> CharacteristicPanel::dates() const {
  std::vector<int> out;
  out.reserve(months.size());
  for (const auto& m : months) out.push_back(m.date);
  return out;
}

void CharacteristicPanel::validate() const {
  if (char_names.empty()) throw ValidationError("panel has no characteristics");
  const auto I = static_cast<Eigen::Index>(char_names.size());
  for (std::size_t t = 0; t < months.size(); ++t) {
    const auto& m = months[t];
    const auto n = static_cast<Eigen::Index>(m.assets.size());
    if (m.X.rows() != n || m.X.cols() != I || m.returns.size() != n || m.mktcap.size() != n ||
        m.prices.size() != n) {
      throw ValidationError("month " + std::to_string(m.date) + ": inconsistent row counts");
    }
    if (t > 0 && months[t - 1].date >= m.date) {
      throw ValidationError("dates are not strictly increasing at " + std::to_string(m.date));
    }
    for (std::size_t a = 1; a < m.assets.size(); ++a) {
      if (!(m.assets[a - 1] < m.assets[a])) {
        throw ValidationError("month " + std::to_string(m.date) +
                              ": asset ids not strictly sorted near '" + m.assets[a] + "'");
      }
    }
  }
}

CharacteristicPanel CharacteristicPanel::slice(std::size_t first, std::size_t count) const {
  if (first + count > months.size()) throw PreconditionError("panel slice out of range");
  CharacteristicPanel out;
  out.char_names = char_names;
  out.months.assign(months.begin() + static_cast<std::ptrdiff_t>(first),
                    months.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

CharacteristicPanel load_panel_stream(std::istream& in, const PanelSchema& schema) {
  const csv::Table table = csv::read(in);

  auto require = [&](const std::string& name) {
    const long c = table.column(name);
    if (c < 0) throw ValidationError("panel CSV has no column '" + name + "'");
    return c;
  };
  const long date_col = require(schema.date);
  const long asset_col = require(schema.asset);
  const long ret_col = require(schema.ret);
  const long cap_col = require(schema.mktcap);
  const long price_col = schema.price.empty() ? -1 : require(schema.price);

  std::vector<std::string> names = schema.characteristics;
  if (names.empty()) {
    for (const auto& h : table.header) {
      if (h != schema.date && h != schema.asset && h != schema.ret && h != schema.mktcap &&
          (schema.price.empty() || h != schema.price)) {
        names.push_back(h);
      }
    }
  }
  if (names.empty()) throw ValidationError("panel CSV has no characteristic columns");
  std::vector<long> char_cols;
  for (const auto& n : names) char_cols.push_back(require(n));

  std::vector<RawRow> rows;
  rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    if (row.size() != table.header.size()) {
      throw ParseError(line, "expected " + std::to_string(table.header.size()) + " fields, got " +
                                 std::to_string(row.size()));
    }
    RawRow raw;
    raw.date = parse_date(row[static_cast<std::size_t>(date_col)], line);
    raw.asset = row[static_cast<std::size_t>(asset_col)];
    if (raw.asset.empty()) throw ParseError(line, "empty asset id");
    raw.ret = parse_number(row, ret_col, line, schema.ret);
    raw.mktcap = parse_number(row, cap_col, line, schema.mktcap);
    raw.price = price_col < 0 ? kNaN : parse_number(row, price_col, line, schema.price);
    raw.chars.reserve(char_cols.size());
    for (std::size_t k = 0; k < char_cols.size(); ++k) {
      raw.chars.push_back(parse_number(row, char_cols[k], line, names[k]));
    }
    if (std::isnan(raw.ret) || std::isnan(raw.mktcap)) continue;
    rows.push_back(std::move(raw));
  }

  std::stable_sort(rows.begin(), rows.end(), [](const RawRow& a, const RawRow& b) {
    return std::tie(a.date, a.asset) < std::tie(b.date, b.asset);
  });
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].date == rows[r - 1].date && rows[r].asset == rows[r - 1].asset) {
      throw ValidationError("duplicate (date, asset) pair (" + std::to_string(rows[r].date) +
                            ", " + rows[r].asset + ")");
    }
  }

  CharacteristicPanel panel;
  panel.char_names = names;
  const auto I = static_cast<Eigen::Index>(names.size());
  std::size_t r = 0;
  while (r < rows.size()) {
    std::size_t end = r;
    while (end < rows.size() && rows[end].date == rows[r].date) ++end;
    const auto n = static_cast<Eigen::Index>(end - r);
    MonthSlice m;
    m.date = rows[r].date;
    m.X.resize(n, I);
    m.returns.resize(n);
    m.mktcap.resize(n);
    m.prices.resize(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      const auto& raw = rows[r + static_cast<std::size_t>(a)];
      m.assets.push_back(raw.asset);
      m.returns(a) = raw.ret;
      m.mktcap(a) = raw.mktcap;
      m.prices(a) = raw.price;
      for (Eigen::Index i = 0; i < I; ++i) m.X(a, i) = raw.chars[static_cast<std::size_t>(i)];
    }
    panel.months.push_back(std::move(m));
    r = end;
  }
  panel.validate();
  return panel;
}

CharacteristicPanel load_panel(const std::string& path, const PanelSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open panel file '" + path + "'");
  return load_panel_stream(in, schema);
}

void write_panel_csv(std::ostream& out, const CharacteristicPanel& panel) {
  csv::Row header = {"date", "asset", "ret", "mktcap", "price"};
  header.insert(header.end(), panel.char_names.begin(), panel.char_names.end());
  csv::write_row(out, header);
  for (const auto& m : panel.months) {
    for (std::size_t a = 0; a < m.size(); ++a) {
      const auto ai = static_cast<Eigen::Index>(a);
      csv::Row row = {std::to_string(m.date), m.assets[a], csv::format_double(m.returns(ai)),
                      csv::format_double(m.mktcap(ai)), csv::format_double(m.prices(ai))};
      for (Eigen::Index i = 0; i < m.X.cols(); ++i) row.push_back(csv::format_double(m.X(ai, i)));
      csv::write_row(out, row);
    }
  }
}

InstrumentMatrix standardize(const CharacteristicPanel& panel, ImputePolicy impute) {
  InstrumentMatrix out;
  const auto I = static_cast<Eigen::Index>(panel.num_characteristics());
  for (const auto& m : panel.months) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd Z(n, I + 1);
    for (Eigen::Index i = 0; i < I; ++i) {
      double sum = 0;
      Eigen::Index count = 0;
      for (Eigen::Index a = 0; a < n; ++a) {
        if (!std::isnan(m.X(a, i))) {
          sum += m.X(a, i);
          ++count;
        }
      }
      const auto& name = panel.char_names[static_cast<std::size_t>(i)];
      if (count < 2) throw DegenerateColumnError(m.date, name);
      const double mean = sum / static_cast<double>(count);
      double ss = 0;
      for (Eigen::Index a = 0; a < n; ++a) {
        if (!std::isnan(m.X(a, i))) ss += (m.X(a, i) - mean) * (m.X(a, i) - mean);
      }
      const double sd = std::sqrt(ss / static_cast<double>(count));
      if (!(sd > 0) || sd <= 1e-14 * std::max(1.0, std::abs(mean))) {
        throw DegenerateColumnError(m.date, name);
      }
      std::vector<double> observed;
      for (Eigen::Index a = 0; a < n; ++a) {
        if (!std::isnan(m.X(a, i))) {
          Z(a, i) = (m.X(a, i) - mean) / sd;
          observed.push_back(Z(a, i));
        }
      }
      double fill = 0.0;
      if (impute == ImputePolicy::kMedian) {
        std::sort(observed.begin(), observed.end());
        const std::size_t h = observed.size() / 2;
        fill = observed.size() % 2 ? observed[h] : 0.5 * (observed[h - 1] + observed[h]);
      }
      for (Eigen::Index a = 0; a < n; ++a) {
        if (std::isnan(m.X(a, i))) Z(a, i) = fill;
      }
    }
    Z.col(I).setOnes();
    out.dates.push_back(m.date);
    out.Z.push_back(std::move(Z));
  }
  return out;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
  const auto n = values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) < values(b); });
  Eigen::VectorXd ranks(n);
  std::size_t k = 0;
  while (k < order.size()) {
    std::size_t end = k + 1;
    while (end < order.size() && values(order[end]) == values(order[k])) ++end;
    // positions k..end-1 (0-based) share rank mean(k+1..end)
    const double r = 0.5 * static_cast<double>(k + 1 + end);
    for (std::size_t p = k; p < end; ++p) ranks(order[p]) = r;
    k = end;
  }
  return ranks;
}

RankPanel rank_transform(const CharacteristicPanel& panel) {
  RankPanel out;
  const auto I = static_cast<Eigen::Index>(panel.num_characteristics());
  for (const auto& m : panel.months) {
    const auto n = static_cast<Eigen::Index>(m.size());
    const double median_rank = 0.5 * static_cast<double>(n + 1);
    Eigen::MatrixXd R(n, I);
    std::vector<bool> present(static_cast<std::size_t>(I), false);
    for (Eigen::Index i = 0; i < I; ++i) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index a = 0; a < n; ++a) {
        if (!std::isnan(m.X(a, i))) idx.push_back(a);
      }
      R.col(i).setConstant(median_rank);
      const auto M = static_cast<Eigen::Index>(idx.size());
      present[static_cast<std::size_t>(i)] = M > 0;
      if (M < 2) continue;
      Eigen::VectorXd vals(M);
      for (Eigen::Index k = 0; k < M; ++k) vals(k) = m.X(idx[static_cast<std::size_t>(k)], i);
      const Eigen::VectorXd r = average_ranks(vals);
      const double scale = static_cast<double>(n - 1) / static_cast<double>(M - 1);
      for (Eigen::Index k = 0; k < M; ++k) {
        R(idx[static_cast<std::size_t>(k)], i) = M == n ? r(k) : 1.0 + (r(k) - 1.0) * scale;
      }
    }
    out.dates.push_back(m.date);
    out.ranks.push_back(std::move(R));
    out.present.push_back(std::move(present));
  }
  return out;
}

WeightSeries build_weights(const CharacteristicPanel& panel, WeightScheme scheme,
                           double price_floor) {
  WeightSeries out;
  out.scheme = scheme;
  for (const auto& m : panel.months) {
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
    if (scheme == WeightScheme::kValue) {
      for (Eigen::Index a = 0; a < n; ++a) {
        if (!(m.mktcap(a) > 0)) {
          throw ValidationError("month " + std::to_string(m.date) + ": asset '" +
                                m.assets[static_cast<std::size_t>(a)] +
                                "' has nonpositive market cap");
        }
        w(a) = m.mktcap(a);
      }
    } else {
      for (Eigen::Index a = 0; a < n; ++a) {
        // Without a price column every asset passes the floor.
        const bool keep = std::isnan(m.prices(a)) || m.prices(a) >= price_floor;
        w(a) = keep ? 1.0 : 0.0;
      }
    }
    const double total = w.sum();
    if (!(total > 0)) throw EmptyMonthError(m.date);
    w /= total;
    out.dates.push_back(m.date);
    out.w.push_back(std::move(w));
  }
  return out;
}

WeightScheme parse_weight_scheme(const std::string& name) {
  if (name == "value") return WeightScheme::kValue;
  if (name == "equal") return WeightScheme::kEqual;
  throw ConfigError("unknown weighting scheme '" + name + "' (expected value|equal)");
}

std::string to_string(WeightScheme scheme) {
  return scheme == WeightScheme::kValue ? "value" : "equal";
}

}  // namespace cipca
