#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "cipca/panel.hpp"

namespace testing_support {

inline cipca::CharacteristicPanel panel_from_text(const std::string& text, const cipca::PanelSchema& schema = {}) {
  std::istringstream in(text);
  return cipca::load_panel_stream(in, schema);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("cipca_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Eigen::MatrixXd random_similarity(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.37, 1.0);
  Eigen::MatrixXd S = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < S.rows(); ++i)
    for (Eigen::Index j = i + 1; j < S.cols(); ++j) S(i, j) = S(j, i) = u(rng);
  return S;
}

}  // namespace testing_support

namespace testing_support {

// Panel whose month t has characteristics X[t] (rows = assets), unit caps,
// zero returns and prices of 10.
inline cipca::CharacteristicPanel panel_of(const std::vector<Eigen::MatrixXd>& X) {
  cipca::CharacteristicPanel p;
  for (Eigen::Index c = 0; c < X.front().cols(); ++c) p.char_names.push_back("c" + std::to_string(c + 1));
  int date = 200001;
  for (const auto& x : X) {
    cipca::MonthSlice m;
    m.date = date++;
    for (Eigen::Index i = 0; i < x.rows(); ++i) m.assets.push_back("A" + std::to_string(1000 + i));
    m.X = x;
    m.returns = Eigen::VectorXd::Zero(x.rows());
    m.mktcap = Eigen::VectorXd::Ones(x.rows());
    m.prices = Eigen::VectorXd::Constant(x.rows(), 10);
    p.months.push_back(m);
  }
  return p;
}

}  // namespace testing_support

#include <fstream>

#include "cipca/serialize.hpp"
#include "cipca/synthetic.hpp"

namespace testing_support {

// Small planted data set plus a config.toml in `dir`; returns the config path.
inline std::string write_fixture(const std::filesystem::path& dir, const std::string& mode = "dc") {
  cipca::SyntheticConfig sc;
  sc.N = 60;
  sc.T = 72;
  sc.I = 6;
  sc.K = 2;
  sc.seed = 5;
  const auto sp = cipca::make_synthetic_panel(sc);
  std::ostringstream panel;
  cipca::write_panel_csv(panel, sp.panel);
  cipca::io::write_file_atomic((dir / "panel.csv").string(), panel.str());
  std::ostringstream prior;
  cipca::io::write_partition_csv(prior, sp.truth, sp.panel.char_names);
  cipca::io::write_file_atomic((dir / "prior.csv").string(), prior.str());
  std::ofstream cfg(dir / "config.toml");
  cfg << "[input]\npanel = \"panel.csv\"\nprior = \"prior.csv\"\n\n"
      << "[run]\nmode = \"" << mode << "\"\ntrain_months = 36\nseed = 3\n\n"
      << "[clustering]\nknn = [2, 3]\nm = [4, 5]\nK_max = 6\nK = 2\n\n"
      << "[evaluation]\ntangency_burn_in = 12\n\n"
      << "[selection]\nmode = \"both\"\ntr = 0.25\ntop_n = 3\n";
  return (dir / "config.toml").string();
}

}  // namespace testing_support
