#include "vatika/mixtures.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"
#include "vatika/sha256.hpp"

namespace vatika {

using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::m1_baseline: return "m1_baseline";
    case Strategy::m2_continued: return "m2_continued";
    case Strategy::m3_multisource: return "m3_multisource";
    default: return "custom";
  }
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "m1_baseline") return Strategy::m1_baseline;
  if (s == "m2_continued") return Strategy::m2_continued;
  if (s == "m3_multisource") return Strategy::m3_multisource;
  if (s == "custom") return Strategy::custom;
  throw ValidationError("unknown strategy '" + std::string(s) + "'");
}

std::string_view to_string(StageInit s) {
  return s == StageInit::base_model ? "base_model" : "previous_stage";
}

StageInit stage_init_from_string(std::string_view s) {
  if (s == "base_model") return StageInit::base_model;
  if (s == "previous_stage") return StageInit::previous_stage;
  throw ValidationError("unknown stage init '" + std::string(s) + "'");
}

std::string_view to_string(MixtureSource s) {
  switch (s) {
    case MixtureSource::original: return "original";
    case MixtureSource::synthetic: return "synthetic";
    default: return "mixed";
  }
}

MixtureSource mixture_source_from_string(std::string_view s) {
  if (s == "original") return MixtureSource::original;
  if (s == "synthetic") return MixtureSource::synthetic;
  if (s == "mixed") return MixtureSource::mixed;
  throw ValidationError("unknown mixture source '" + std::string(s) + "'");
}

size_t TrainingStage::total_instances() const {
  size_t total = 0;
  for (const MixtureEntry& e : mixture) total += e.instances;
  return total;
}

// --- Serialization -----------------------------------------------------------

std::string TrainingPlan::to_json() const {
  json stages_json = json::array();
  for (const TrainingStage& s : stages) {
    json mixture = json::array();
    for (const MixtureEntry& e : s.mixture) {
      mixture.push_back({{"split_name", e.split_name},
                         {"path", e.path},
                         {"digest", e.digest},
                         {"instances", e.instances},
                         {"source", std::string(to_string(e.source))}});
    }
    stages_json.push_back({{"stage_index", s.stage_index},
                           {"mixture", std::move(mixture)},
                           {"epochs", s.epochs},
                           {"init_from", std::string(to_string(s.init_from))}});
  }
  json j{{"plan_id", plan_id},
         {"strategy", std::string(to_string(strategy))},
         {"shuffle_seed", shuffle_seed},
         {"stages", std::move(stages_json)}};
  return j.dump(2) + "\n";
}

TrainingPlan TrainingPlan::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid plan JSON: ") + e.what());
  }
  TrainingPlan plan;
  plan.plan_id = j.at("plan_id").get<std::string>();
  plan.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  plan.shuffle_seed = j.at("shuffle_seed").get<uint64_t>();
  for (const json& sj : j.at("stages")) {
    TrainingStage stage;
    stage.stage_index = sj.at("stage_index").get<int>();
    stage.epochs = sj.at("epochs").get<int>();
    stage.init_from = stage_init_from_string(sj.at("init_from").get<std::string>());
    for (const json& mj : sj.at("mixture")) {
      MixtureEntry e;
      e.split_name = mj.at("split_name").get<std::string>();
      e.path = mj.value("path", std::string());
      e.digest = mj.at("digest").get<std::string>();
      e.instances = mj.at("instances").get<size_t>();
      e.source = mixture_source_from_string(mj.at("source").get<std::string>());
      stage.mixture.push_back(std::move(e));
    }
    plan.stages.push_back(std::move(stage));
  }
  return plan;
}

void TrainingPlan::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write plan file: " + path.string());
  out << to_json();
}

TrainingPlan TrainingPlan::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open plan file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string TrainingPlan::digest() const { return sha256_hex(to_json()); }

// --- Builders ------------------------------------------------------------------

namespace {

MixtureSource classify_source(const DatasetSplit& split) {
  bool any_original = false, any_synthetic = false;
  for (const QAPair& p : split.pairs()) {
    (p.provenance == Provenance::original ? any_original : any_synthetic) = true;
  }
  if (any_original && any_synthetic) return MixtureSource::mixed;
  return any_synthetic ? MixtureSource::synthetic : MixtureSource::original;
}

MixtureEntry make_entry(const DatasetSplit& split, const std::string& path) {
  return MixtureEntry{split.name(), path, dataset_digest(split), split.pairs().size(),
                      classify_source(split)};
}

void require_trainable(const DatasetSplit& split) {
  if (split.pairs().empty())
    throw ValidationError("split '" + split.name() + "' has no pairs to train on");
  if (!split.all_answers_present())
    throw ValidationError("split '" + split.name() + "' has pairs with missing answers");
}

std::string derive_plan_id(std::string_view tag, const std::vector<TrainingStage>& stages,
                           uint64_t seed) {
  Sha256 h;
  h.update(tag);
  for (const TrainingStage& s : stages) {
    h.update(std::to_string(s.stage_index) + "|" + std::to_string(s.epochs) + "|" +
             std::string(to_string(s.init_from)));
    for (const MixtureEntry& e : s.mixture)
      h.update(e.split_name + "|" + e.digest + "|" + std::to_string(e.instances));
  }
  h.update(std::to_string(seed));
  return std::string(tag) + "-" + h.hex_digest().substr(0, 12);
}

TrainingPlan finish_plan(std::string_view tag, Strategy strategy,
                         std::vector<TrainingStage> stages, uint64_t seed) {
  TrainingPlan plan;
  plan.strategy = strategy;
  plan.stages = std::move(stages);
  plan.shuffle_seed = seed;
  plan.plan_id = derive_plan_id(tag, plan.stages, seed);
  return plan;
}

}  // namespace

TrainingPlan plan_m1(const DatasetSplit& original, uint64_t shuffle_seed,
                     const std::string& original_path) {
  require_trainable(original);
  TrainingStage stage{1, {make_entry(original, original_path)}, 4, StageInit::base_model};
  return finish_plan("m1", Strategy::m1_baseline, {std::move(stage)}, shuffle_seed);
}

TrainingPlan plan_m2(const DatasetSplit& original, const DatasetSplit& synthetic,
                     uint64_t shuffle_seed, const std::string& original_path,
                     const std::string& synthetic_path) {
  require_trainable(original);
  require_trainable(synthetic);
  TrainingStage first{1, {make_entry(original, original_path)}, 2, StageInit::base_model};
  TrainingStage second{2, {make_entry(synthetic, synthetic_path)}, 2, StageInit::previous_stage};
  return finish_plan("m2", Strategy::m2_continued, {std::move(first), std::move(second)},
                     shuffle_seed);
}

TrainingPlan plan_m3(const DatasetSplit& original, const std::vector<DatasetSplit>& synthetic_sets,
                     uint64_t shuffle_seed, const std::string& original_path,
                     const std::vector<std::string>& synthetic_paths) {
  require_trainable(original);
  for (const DatasetSplit& s : synthetic_sets) require_trainable(s);

  if (synthetic_sets.empty()) {
    // Degenerate: nothing to mix; M1-shaped stage flagged custom.
    TrainingStage stage{1, {make_entry(original, original_path)}, 4, StageInit::base_model};
    return finish_plan("m3-custom", Strategy::custom, {std::move(stage)}, shuffle_seed);
  }

  // merge_splits performs the id-collision and context-conflict checks.
  std::vector<DatasetSplit> all{original};
  all.insert(all.end(), synthetic_sets.begin(), synthetic_sets.end());
  (void)merge_splits(all, "m3-union-check");

  std::vector<MixtureEntry> mixture{make_entry(original, original_path)};
  for (size_t i = 0; i < synthetic_sets.size(); ++i) {
    const std::string path = i < synthetic_paths.size() ? synthetic_paths[i] : std::string();
    mixture.push_back(make_entry(synthetic_sets[i], path));
  }
  TrainingStage stage{1, std::move(mixture), 4, StageInit::base_model};
  return finish_plan("m3", Strategy::m3_multisource, {std::move(stage)}, shuffle_seed);
}

// --- Validation --------------------------------------------------------------------

PlanValidationReport validate_plan(const TrainingPlan& plan) {
  PlanValidationReport report;
  auto violation = [&report](std::string msg) { report.violations.push_back(std::move(msg)); };

  if (plan.plan_id.empty()) violation("plan_id is empty");
  if (plan.stages.empty()) {
    violation("plan has no stages");
    return report;
  }

  for (size_t i = 0; i < plan.stages.size(); ++i) {
    const TrainingStage& s = plan.stages[i];
    const std::string label = "stage " + std::to_string(i + 1);
    if (s.stage_index != int(i + 1))
      violation(label + ": stage_index " + std::to_string(s.stage_index) + ", expected " +
                std::to_string(i + 1));
    if (s.epochs < 1) violation(label + ": epochs must be positive");
    if (s.mixture.empty()) violation(label + ": empty mixture");
    for (const MixtureEntry& e : s.mixture) {
      if (e.instances == 0) violation(label + ": mixture entry '" + e.split_name + "' is empty");
      if (e.digest.empty()) violation(label + ": mixture entry '" + e.split_name + "' has no digest");
    }
    if (i == 0 && s.init_from != StageInit::base_model)
      violation(label + ": broken stage chain (stage 1 must init from base_model)");
    if (i > 0 && s.init_from != StageInit::previous_stage)
      violation(label + ": broken stage chain (must init from previous_stage)");
  }

  auto all_source = [](const TrainingStage& s, MixtureSource want) {
    for (const MixtureEntry& e : s.mixture)
      if (e.source != want) return false;
    return !s.mixture.empty();
  };

  switch (plan.strategy) {
    case Strategy::m1_baseline:
      if (plan.stages.size() != 1) violation("m1 must have exactly 1 stage");
      if (!all_source(plan.stages.front(), MixtureSource::original))
        violation("m1 mixture must contain original data only");
      break;
    case Strategy::m2_continued:
      if (plan.stages.size() != 2) {
        violation("m2 must have exactly 2 stages");
      } else {
        if (!all_source(plan.stages[0], MixtureSource::original))
          violation("m2 stage 1 mixture must be original data");
        if (!all_source(plan.stages[1], MixtureSource::synthetic))
          violation("m2 stage 2 mixture must be synthetic data");
      }
      break;
    case Strategy::m3_multisource: {
      if (plan.stages.size() != 1) {
        violation("m3 must have exactly 1 stage");
      } else {
        size_t original = 0, synthetic = 0;
        for (const MixtureEntry& e : plan.stages.front().mixture) {
          if (e.source == MixtureSource::original) ++original;
          if (e.source == MixtureSource::synthetic) ++synthetic;
        }
        if (original != 1) violation("m3 mixture must contain exactly one original source");
        if (synthetic == 0) violation("m3 mixture must contain at least one synthetic source");
      }
      break;
    }
    case Strategy::custom:
      break;
  }
  return report;
}

}  // namespace vatika
