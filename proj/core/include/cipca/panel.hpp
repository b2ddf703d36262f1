#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

namespace cipca {

// Column mapping for the panel CSV. An empty `characteristics` list means
// "every column not named by one of the other fields".
struct PanelSchema {
  std::string date = "date";
  std::string asset = "asset";
  std::string ret = "ret";
  std::string mktcap = "mktcap";
  std::string price = "price";  // empty: no price column
  std::vector<std::string> characteristics;
};

// One cross-section. Missing characteristics are NaN.
struct MonthSlice {
  int date = 0;  // YYYYMM
  std::vector<std::string> assets;
  Eigen::MatrixXd X;  // N_t x I
  Eigen::VectorXd returns;
  Eigen::VectorXd mktcap;
  Eigen::VectorXd prices;  // NaN when the schema has no price column

  std::size_t size() const { return assets.size(); }
};

// Per-month asset x characteristic panel with returns and market caps. Months
// are strictly increasing and assets within a month are sorted by id.
struct CharacteristicPanel {
  std::vector<std::string> char_names;
  std::vector<MonthSlice> months;

  std::size_t num_months() const { return months.size(); }
  std::size_t num_characteristics() const { return char_names.size(); }
  std::vector<int> dates() const;

  // Throws ValidationError when a structural invariant is broken.
  void validate() const;

  // Months [first, first + count).
  CharacteristicPanel slice(std::size_t first, std::size_t count) const;
};

CharacteristicPanel load_panel(const std::string& path, const PanelSchema& schema = {});
CharacteristicPanel load_panel_stream(std::istream& in, const PanelSchema& schema = {});

// Writes the panel back in the loader's layout (date, asset, ret, mktcap, price, chars).
void write_panel_csv(std::ostream& out, const CharacteristicPanel& panel);

enum class ImputePolicy {
  kZero,    // cross-sectional mean after standardization
  kMedian,  // cross-sectional median of the standardized column
};

// Standardized characteristics with a trailing ones column (N_t x (I+1)).
struct InstrumentMatrix {
  std::vector<int> dates;
  std::vector<Eigen::MatrixXd> Z;

  std::size_t num_instruments() const { return Z.empty() ? 0 : static_cast<std::size_t>(Z.front().cols()); }
};

// Per-month z-scores over the non-missing entries (population SD), missing
// entries imputed, then the ones column appended.
InstrumentMatrix standardize(const CharacteristicPanel& panel,
                             ImputePolicy impute = ImputePolicy::kZero);

// Cross-sectional ranks 1..N_t with ties averaged. `present(t, i)` is false when
// characteristic i is entirely missing in month t.
struct RankPanel {
  std::vector<int> dates;
  std::vector<Eigen::MatrixXd> ranks;
  std::vector<std::vector<bool>> present;
};

// Non-missing values are ranked among themselves and mapped linearly onto
// [1, N_t]; missing values get the median rank (N_t + 1) / 2.
RankPanel rank_transform(const CharacteristicPanel& panel);

// Average-tie ranks 1..n of a vector without missing values.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& values);

enum class WeightScheme { kValue, kEqual };

struct WeightSeries {
  WeightScheme scheme = WeightScheme::kValue;
  std::vector<int> dates;
  std::vector<Eigen::VectorXd> w;
};

inline constexpr double kDefaultPriceFloor = 5.0;

// Value scheme: w proportional to market cap. Equal scheme: uniform over assets
// whose price is at least `price_floor`.
WeightSeries build_weights(const CharacteristicPanel& panel, WeightScheme scheme,
                           double price_floor = kDefaultPriceFloor);

WeightScheme parse_weight_scheme(const std::string& name);
std::string to_string(WeightScheme scheme);

}  // namespace cipca
