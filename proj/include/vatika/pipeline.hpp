#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vatika/metrics.hpp"
#include "vatika/synthgen.hpp"

namespace vatika {

// One JSON config file drives the whole pipeline; CLI flags override config
// fields (flag > config > default).
struct PipelineConfig {
  std::filesystem::path registry_root = "runs";
  std::map<std::string, std::filesystem::path> datasets;  // split name -> jsonl path
  std::string original_split = "train";

  struct Backend {
    std::string id;
    std::string kind = "mock";  // mock | http
    // mock knobs
    int pairs_per_context = 5;
    // http endpoint
    std::string host;
    int port = 0;
    std::string path = "/v1/complete";
  };
  std::vector<Backend> backends;
  GenerationConfig generation;       // sampling parameters shared by backends
  int generation_workers = 2;
  bool dedup_enabled = false;
  double dedup_threshold = 0.9;

  std::vector<std::string> strategies = {"m1", "m2", "m3"};
  std::optional<double> learning_rate;
  std::string model_id = "mock-slm";
  std::string trainer = "mock";  // mock | adapter
  std::vector<std::string> trainer_command;
  uint64_t trainer_seed = 0;
  uint64_t shuffle_seed = 0;
  std::string m2_source;  // synthetic split for M2 stage 2; default: largest

  std::vector<std::string> eval_splits;
  MetricSelection metrics;

  std::vector<std::string> report_styles = {"summary"};
  std::vector<std::string> report_formats = {"md", "csv"};

  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig from_json(std::string_view text);
};

struct PipelineResult {
  int exit_code = 0;  // 0 ok, 1 validation, 2 backend, 3 partial pipeline
  std::string registry_digest;
  std::vector<std::string> run_ids;
  std::string error;
};

// generate -> mix -> train -> evaluate -> report, in one invocation. Any
// stage error aborts the later stages; artifacts produced so far stay on disk
// for inspection. Progress lines go to `log`.
PipelineResult run_pipeline(const PipelineConfig& config, std::ostream& log);

}  // namespace vatika
