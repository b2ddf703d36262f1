#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cipca/config.hpp"
#include "cipca/error.hpp"
#include "cipca/logging.hpp"
#include "cipca/pipeline.hpp"
#include "cipca/serialize.hpp"
#include "cipca/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::string mode;
  std::string weights;
  std::int64_t seed = -1;
  int jobs = -1;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "configuration file")->required();
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--mode", f.mode, "restriction mode")
      ->check(CLI::IsMember({"ic", "dc", "pdc", "rc", "ipca"}));
  cmd->add_option("--weights", f.weights, "weighting scheme")->check(CLI::IsMember({"value", "equal"}));
  cmd->add_option("--seed", f.seed, "root seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--jobs", f.jobs, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--set", f.sets, "override, section.key=value");
}

cipca::RunConfig load(const CommonFlags& f) {
  std::vector<std::string> overrides = f.sets;
  if (!f.mode.empty()) overrides.push_back("run.mode=" + f.mode);
  if (!f.weights.empty()) overrides.push_back("run.weights=" + f.weights);
  if (f.seed >= 0) overrides.push_back("run.seed=" + std::to_string(f.seed));
  if (f.jobs >= 0) overrides.push_back("run.jobs=" + std::to_string(f.jobs));
  cipca::RunConfig c = cipca::load_config(f.config, overrides);
  if (!f.out.empty()) c.out = f.out;
  return c;
}

int run(const CommonFlags& f, const std::vector<std::string>& stages) {
  const cipca::RunConfig c = load(f);
  const cipca::PipelineResult r = cipca::run_stages(c, stages);
  for (const auto& s : r.stages) {
    std::cout << s.name << ": " << s.status;
    if (!s.artifacts.empty()) {
      std::cout << " (";
      for (std::size_t i = 0; i < s.artifacts.size(); ++i) std::cout << (i ? ", " : "") << s.artifacts[i];
      std::cout << ")";
    }
    std::cout << "\n";
  }
  if (r.exit_code != 0) {
    std::cerr << "stage '" << r.failed_stage << "' failed: " << r.message << "\n";
  }
  return r.exit_code;
}

struct SynthFlags {
  std::string out;
  std::size_t N = 80;
  std::size_t T = 120;
  std::size_t I = 8;
  int K = 2;
  double noise_ratio = 0.5;
  std::uint64_t seed = 7;
};

// Writes a small planted-structure data set plus a matching config.
int synth(const SynthFlags& s) {
  cipca::SyntheticConfig sc;
  sc.N = s.N;
  sc.T = s.T;
  sc.I = s.I;
  sc.K = s.K;
  sc.noise_ratio = s.noise_ratio;
  sc.seed = s.seed;
  const cipca::SyntheticPanel sp = cipca::make_synthetic_panel(sc);
  fs::create_directories(s.out);
  const fs::path dir(s.out);

  std::ostringstream panel;
  cipca::write_panel_csv(panel, sp.panel);
  cipca::io::write_file_atomic((dir / "panel.csv").string(), panel.str());

  std::ostringstream prior;
  cipca::io::write_partition_csv(prior, sp.truth, sp.panel.char_names);
  cipca::io::write_file_atomic((dir / "prior.csv").string(), prior.str());

  // Benchmark: the planted market factor (last column), months 1..T-1.
  const auto dates = sp.panel.dates();
  const Eigen::Index J = sp.factors.cols();
  const Eigen::Index rows = sp.factors.rows() - 1;
  const Eigen::MatrixXd mkt = sp.factors.block(1, J - 1, rows, 1);
  std::ostringstream bench;
  cipca::io::write_factors_csv(bench, std::vector<int>(dates.begin() + 1, dates.end()), {"MKT"}, mkt);
  cipca::io::write_file_atomic((dir / "benchmarks.csv").string(), bench.str());

  const std::size_t train = s.T / 2;
  std::ostringstream cfg;
  cfg << "[input]\n"
      << "panel = \"panel.csv\"\n"
      << "prior = \"prior.csv\"\n"
      << "benchmarks = \"benchmarks.csv\"\n\n"
      << "[run]\n"
      << "out = \"out\"\n"
      << "mode = \"dc\"\n"
      << "weights = \"value\"\n"
      << "train_months = " << train << "\n"
      << "seed = " << s.seed << "\n\n"
      << "[clustering]\n"
      << "knn = [3, 5]\n"
      << "m = [4, 6]\n"
      << "K_max = " << s.I << "\n"
      << "K = " << s.K << "\n\n"
      << "[evaluation]\n"
      << "tangency_burn_in = " << train / 3 << "\n\n"
      << "[selection]\n"
      << "mode = \"both\"\n"
      << "tr = 0.25\n"
      << "top_n = 5\n";
  cipca::io::write_file_atomic((dir / "config.toml").string(), cfg.str());
  std::cout << "wrote panel.csv, prior.csv, benchmarks.csv, config.toml to " << s.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  cipca::init_logging_from_env();
  CLI::App app{"Cluster-restricted instrumented PCA factor pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", cipca::library_version());

  CommonFlags flags;
  std::vector<std::string> selected;
  for (const auto& stage : cipca::stage_names()) {
    auto* cmd = app.add_subcommand(stage, "run the " + stage + " stage");
    add_common(cmd, flags);
    cmd->callback([&selected, stage] { selected = {stage}; });
  }
  auto* pipe = app.add_subcommand("pipeline", "run every stage in order");
  add_common(pipe, flags);
  pipe->callback([&selected] { selected = cipca::stage_names(); });

  SynthFlags sflags;
  bool do_synth = false;
  auto* syn = app.add_subcommand("synth", "write a synthetic fixture and config");
  syn->add_option("--out", sflags.out, "output directory")->required();
  syn->add_option("--assets", sflags.N, "assets per month");
  syn->add_option("--months", sflags.T, "months");
  syn->add_option("--characteristics", sflags.I, "characteristics");
  syn->add_option("--clusters", sflags.K, "planted clusters");
  syn->add_option("--noise", sflags.noise_ratio, "noise SD relative to signal RMS");
  syn->add_option("--seed", sflags.seed, "seed");
  syn->callback([&do_synth] { do_synth = true; });

  CLI11_PARSE(app, argc, argv);

  try {
    if (do_synth) return synth(sflags);
    return run(flags, selected);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
