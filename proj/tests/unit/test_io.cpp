#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include "json.hpp"
#include <sstream>

#include "cipca/config.hpp"
#include "cipca/csv.hpp"
#include "cipca/error.hpp"
#include "cipca/pipeline.hpp"
#include "cipca/serialize.hpp"
#include "support.hpp"

using namespace cipca;
using testing_support::TempDir;
namespace fs = std::filesystem;

TEST(Config, ParsesSectionsArraysAndComments) {
  const auto m = parse_config_text(
      "# top\n[run]\nmode = \"pdc\"  # inline\nseed = 9\n\n[clustering]\nknn = [5, 10]\n");
  EXPECT_EQ(m.at("run.mode"), "pdc");
  EXPECT_EQ(m.at("run.seed"), "9");
  const auto c = config_from_map(m);
  EXPECT_EQ(c.mode, RestrictionMode::kPDC);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.knn_grid, (std::vector<int>{5, 10}));
}

TEST(Config, OverridesReplaceFileValues) {
  auto m = parse_config_text("[run]\nmode = \"dc\"\n");
  apply_overrides(m, {"run.mode=rc", "clustering.K=4"});
  const auto c = config_from_map(m);
  EXPECT_EQ(c.mode, RestrictionMode::kRC);
  EXPECT_EQ(c.K, 4);
  EXPECT_THROW(apply_overrides(m, {"nonsense"}), ConfigError);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(config_from_map(parse_config_text("[run]\nspeed = 3\n")), ConfigError);
  EXPECT_THROW(config_from_map(parse_config_text("[run]\nmode = \"xx\"\n")), ConfigError);
  EXPECT_THROW(config_from_map(parse_config_text("[run]\nseed = abc\n")), ConfigError);
  EXPECT_THROW(parse_config_text("[run]\nseed = 1\nseed = 2\n"), ConfigError);
}

TEST(Config, ValidationCatchesMissingInputsBeforeWork) {
  TempDir dir("cfg");
  RunConfig c;
  c.panel = dir.file("absent.csv");
  c.out = dir.file("out");
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(run_stages(c, {"ingest"}), ConfigError);
  EXPECT_FALSE(fs::exists(dir.file("out")));
}

TEST(Config, CanonicalTextIgnoresJobsOnly) {
  RunConfig a, b;
  b.jobs = 7;
  EXPECT_EQ(a.canonical_text(), b.canonical_text());
  b.seed = 99;
  EXPECT_NE(a.canonical_text(), b.canonical_text());
  EXPECT_EQ(config_from_map(a.to_map()).canonical_text(), a.canonical_text());
}

TEST(Csv, QuotingRoundTrip) {
  std::ostringstream out;
  csv::write_row(out, {"plain", "a,b", "say \"hi\"", "two\nlines"});
  EXPECT_EQ(out.str(), "plain,\"a,b\",\"say \"\"hi\"\"\",\"two\nlines\"\r\n");
  std::istringstream in(out.str());
  const auto t = csv::read(in);
  EXPECT_EQ(t.header, (csv::Row{"plain", "a,b", "say \"hi\"", "two\nlines"}));
}

TEST(Csv, DoublesRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 0.0}) {
    double back = 0;
    ASSERT_TRUE(csv::parse_double(csv::format_double(v), back));
    EXPECT_EQ(back, v);
  }
  double x;
  EXPECT_TRUE(csv::is_missing("NA"));
  EXPECT_FALSE(csv::parse_double("12abc", x));
}

TEST(Serialize, PartitionRoundTrip) {
  TempDir dir("part");
  Partition p;
  p.assignment = {0, 1, 0, 2, 1};
  p.K = 3;
  p.labels = {"value, growth", "size", "mom"};
  const std::vector<std::string> names = {"bm", "me", "ep", "r12", "at"};
  std::ostringstream out;
  io::write_partition_csv(out, p, names);
  io::write_file_atomic(dir.file("p.csv"), out.str());
  const auto q = io::read_partition_csv(dir.file("p.csv"), names);
  EXPECT_EQ(q.assignment, p.assignment);
  EXPECT_EQ(q.labels, p.labels);
  // Reordered names follow the file.
  const auto r = io::read_partition_csv(dir.file("p.csv"), {"at", "r12", "ep", "me", "bm"});
  EXPECT_EQ(r.clusters().size(), 3u);
  EXPECT_THROW(io::read_partition_csv(dir.file("p.csv"), {"bm", "me"}), Error);
}

TEST(Serialize, FactorsRoundTrip) {
  TempDir dir("fac");
  Eigen::MatrixXd F(3, 2);
  F << 0.1, -0.2, 1.0 / 3.0, 4e-9, -7.25, 0;
  std::ostringstream out;
  io::write_factors_csv(out, {200001, 200002, 200003}, {"f1", "f,2"}, F);
  io::write_file_atomic(dir.file("f.csv"), out.str());
  const auto s = io::read_factors_csv(dir.file("f.csv"));
  EXPECT_EQ(s.dates, (std::vector<int>{200001, 200002, 200003}));
  EXPECT_EQ(s.names, (std::vector<std::string>{"f1", "f,2"}));
  EXPECT_EQ(s.F, F);
}

TEST(Serialize, Sha256KnownValue) {
  EXPECT_EQ(io::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

namespace {

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = io::read_file(e.path().string());
  return out;
}

}  // namespace

TEST(Pipeline, RunsAllStagesAndRecordsManifest) {
  TempDir dir("pipe");
  const auto path = testing_support::write_fixture(dir.path());
  RunConfig c = load_config(path);
  c.out = dir.file("out");
  const auto r = run_pipeline(c);
  ASSERT_EQ(r.exit_code, 0) << r.failed_stage << ": " << r.message;
  const auto manifest = nlohmann::json::parse(io::read_file(dir.file("out/manifest.json")));
  EXPECT_EQ(manifest["status"], "ok");
  for (const auto& s : stage_names()) {
    ASSERT_TRUE(manifest["stages"].contains(s)) << s;
    EXPECT_EQ(manifest["stages"][s]["status"], "ok") << s;
    for (const auto& a : manifest["stages"][s]["artifacts"]) {
      const std::string file = a["file"];
      EXPECT_EQ(a["sha256"], io::sha256_hex(io::read_file(dir.file("out/" + file))));
    }
  }
  for (const char* f : {"panel.csv", "similarity.csv", "partition.csv", "model.json", "factors.csv",
                        "oos_factors.csv", "tangency.csv", "ordered.csv", "bayes.csv", "embedding.csv"}) {
    EXPECT_TRUE(fs::exists(dir.file(std::string("out/") + f))) << f;
  }
}

TEST(Pipeline, RerunIsByteIdenticalAcrossJobs) {
  TempDir dir("rerun");
  const auto path = testing_support::write_fixture(dir.path());
  RunConfig c = load_config(path);
  c.out = dir.file("a");
  c.jobs = 1;
  ASSERT_EQ(run_pipeline(c).exit_code, 0);
  c.out = dir.file("b");
  c.jobs = 4;
  ASSERT_EQ(run_pipeline(c).exit_code, 0);
  EXPECT_EQ(snapshot(dir.file("a")), snapshot(dir.file("b")));
}

TEST(Pipeline, SingleStagesReuseArtifacts) {
  TempDir dir("single");
  const auto path = testing_support::write_fixture(dir.path());
  RunConfig c = load_config(path);
  c.out = dir.file("out");
  ASSERT_EQ(run_pipeline(c).exit_code, 0);
  const auto before = io::read_file(dir.file("out/oos_factors.csv"));
  fs::remove(dir.file("out/oos_factors.csv"));
  ASSERT_EQ(run_stages(c, {"oos"}).exit_code, 0);
  EXPECT_EQ(io::read_file(dir.file("out/oos_factors.csv")), before);
}

TEST(Pipeline, FailureMarksDownstreamStale) {
  TempDir dir("fail");
  const auto path = testing_support::write_fixture(dir.path());
  RunConfig c = load_config(path);
  c.out = dir.file("out");
  ASSERT_EQ(run_pipeline(c).exit_code, 0);
  io::write_file_atomic(dir.file("out/partition.csv"), "characteristic,cluster,label\r\nnope,1,\r\n");
  const auto r = run_stages(c, {"fit"});
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_EQ(r.failed_stage, "fit");
  const auto m = nlohmann::json::parse(io::read_file(dir.file("out/manifest.json")));
  EXPECT_EQ(m["status"], "failed");
  EXPECT_EQ(m["stages"]["fit"]["status"], "failed");
  EXPECT_EQ(m["stages"]["cluster"]["status"], "ok");
  for (const char* s : {"oos", "tangency", "select-bayes"}) {
    EXPECT_EQ(m["stages"][s]["status"], "stale") << s;
    for (const auto& a : m["stages"][s]["artifacts"]) EXPECT_TRUE(a["stale"].get<bool>());
  }
}

TEST(Pipeline, IpcaModeSkipsClustering) {
  TempDir dir("ipca");
  const auto path = testing_support::write_fixture(dir.path(), "ipca");
  RunConfig c = load_config(path, {"fit.ipca_factors=3"});
  c.out = dir.file("out");
  const auto r = run_pipeline(c);
  ASSERT_EQ(r.exit_code, 0) << r.message;
  for (const auto& s : r.stages)
    if (s.name == "cluster") EXPECT_EQ(s.status, "skipped");
}

TEST(Pipeline, UnknownStageRejected) {
  TempDir dir("unk");
  const auto path = testing_support::write_fixture(dir.path());
  RunConfig c = load_config(path);
  c.out = dir.file("out");
  EXPECT_THROW(run_stages(c, {"bogus"}), Error);
}

TEST(Config, RelativePathsResolveAgainstConfigDirectory) {
  TempDir dir("resolve");
  const auto path = testing_support::write_fixture(dir.path());
  const RunConfig c = load_config(path);
  EXPECT_EQ(fs::path(c.out), (dir.path() / "out").lexically_normal());
  EXPECT_EQ(fs::path(c.resolve(c.panel)), (dir.path() / "panel.csv").lexically_normal());
}
