#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "vatika/dataset.hpp"

namespace vatika {

enum class Strategy { m1_baseline, m2_continued, m3_multisource, custom };
enum class StageInit { base_model, previous_stage };
enum class MixtureSource { original, synthetic, mixed };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);
std::string_view to_string(StageInit s);
StageInit stage_init_from_string(std::string_view s);
std::string_view to_string(MixtureSource s);
MixtureSource mixture_source_from_string(std::string_view s);

// Tamper-evident reference to a split: name + content digest (+ path when the
// split came from disk).
struct MixtureEntry {
  std::string split_name;
  std::string path;  // empty for in-memory splits
  std::string digest;
  size_t instances = 0;
  MixtureSource source = MixtureSource::original;

  friend bool operator==(const MixtureEntry&, const MixtureEntry&) = default;
};

struct TrainingStage {
  int stage_index = 1;  // 1-based
  std::vector<MixtureEntry> mixture;
  int epochs = 1;
  StageInit init_from = StageInit::base_model;

  size_t total_instances() const;

  friend bool operator==(const TrainingStage&, const TrainingStage&) = default;
};

struct TrainingPlan {
  std::string plan_id;
  Strategy strategy = Strategy::custom;
  std::vector<TrainingStage> stages;
  // Within-stage example ordering is a uniform shuffle with this seed.
  uint64_t shuffle_seed = 0;

  std::string to_json() const;
  static TrainingPlan from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static TrainingPlan load(const std::filesystem::path& path);

  // sha256 of the serialized plan.
  std::string digest() const;

  friend bool operator==(const TrainingPlan&, const TrainingPlan&) = default;
};

// --- Plan builders -----------------------------------------------------------
// Split paths are recorded in mixture entries when supplied (parallel to the
// split arguments); pass empty strings for in-memory splits.

// Baseline: one 4-epoch stage over the original pairs.
TrainingPlan plan_m1(const DatasetSplit& original, uint64_t shuffle_seed = 0,
                     const std::string& original_path = {});

// Continued finetuning: 2 epochs on the original from the base model, then 2
// epochs on the synthetic split from the previous stage.
TrainingPlan plan_m2(const DatasetSplit& original, const DatasetSplit& synthetic,
                     uint64_t shuffle_seed = 0, const std::string& original_path = {},
                     const std::string& synthetic_path = {});

// Multi-source: one 4-epoch stage over original + every synthetic split, one
// mixture entry per source. An empty synthetic list degenerates to an
// M1-shaped single stage flagged strategy = custom.
TrainingPlan plan_m3(const DatasetSplit& original, const std::vector<DatasetSplit>& synthetic_sets,
                     uint64_t shuffle_seed = 0, const std::string& original_path = {},
                     const std::vector<std::string>& synthetic_paths = {});

// --- Validation ----------------------------------------------------------------

struct PlanValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Checks strategy invariants, stage chaining and mixture sanity; reports
// every violation rather than stopping at the first.
PlanValidationReport validate_plan(const TrainingPlan& plan);

}  // namespace vatika
