#pragma once

#include <string>
#include <vector>

#include "cipca/config.hpp"

namespace cipca {

// Stage order of the full pipeline. Each stage reads earlier artifacts from the
// output directory when they are not already in memory, so stages can be rerun
// one at a time.
const std::vector<std::string>& stage_names();

struct StageReport {
  std::string name;
  std::string status;  // ok, skipped, failed
  std::string error;
  std::vector<std::string> artifacts;
};

struct PipelineResult {
  int exit_code = 0;
  std::string failed_stage;
  std::string message;
  std::vector<StageReport> stages;
};

// Runs `stages` in the given order and rewrites manifest.json. A failure stops
// the run; the failed stage and every later stage already in the manifest are
// marked stale.
PipelineResult run_stages(const RunConfig& config, const std::vector<std::string>& stages);
PipelineResult run_pipeline(const RunConfig& config);

std::string library_version();

}  // namespace cipca
