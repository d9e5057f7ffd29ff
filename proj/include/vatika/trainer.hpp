#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vatika/dataset.hpp"
#include "vatika/mixtures.hpp"
#include "vatika/predictions.hpp"

namespace vatika {

// Fine-tuning hyperparameters. The listed defaults are the toolkit's
// reference configuration; learning_rate deliberately has no default and a
// run refuses to start without an explicit value.
struct TrainerConfig {
  int max_sequence_length = 4096;
  int per_device_batch_size = 2;
  int gradient_accumulation_steps = 4;
  int warmup_steps = 5;
  std::string lr_scheduler = "cosine";
  std::optional<double> learning_rate;
  std::string model_id = "mock-slm";
  uint64_t seed = 0;

  int effective_batch_size() const { return per_device_batch_size * gradient_accumulation_steps; }
  std::string to_json() const;
  static TrainerConfig from_json(std::string_view text);
  std::string digest() const;
};

// ceil(instances / effective batch).
int64_t steps_per_epoch(size_t instances, const TrainerConfig& config);

struct LossPoint {
  int64_t step = 0;
  double loss = 0.0;
};

struct ModelArtifact {
  std::string artifact_id;  // content digest of the weights blob
  std::optional<std::string> parent_id;
  std::string plan_id;
  int stage_index = 0;
  std::vector<LossPoint> metrics_log;
  std::string weights_digest;
  std::filesystem::path weights_path;
};

struct PredictionQuery {
  std::string context;
  std::string question;
};

// One stage's worth of work handed to a backend.
struct StageJob {
  std::string plan_id;
  int stage_index = 1;
  int epochs = 1;
  TrainerConfig config;
  std::vector<QAPair> examples;  // already shuffled
  std::string data_digest;
  std::optional<ModelArtifact> parent;
  std::filesystem::path artifact_dir;
};

class TrainingBackend {
 public:
  virtual ~TrainingBackend() = default;
  virtual std::string id() const = 0;
  // Throws BackendError on failure.
  virtual ModelArtifact train_stage(const StageJob& job) = 0;
  virtual std::vector<std::string> predict(const ModelArtifact& artifact,
                                           const std::vector<PredictionQuery>& queries) = 0;
};

// Desk-scale stand-in for a real finetuning stack. The "model" is a stored
// question->answer table plus answer-token frequencies; training is a
// deterministic function of (data digest, config, seed) and the loss curve is
// synthetic and non-increasing. The predictor answers memorized questions
// verbatim and falls back to the most frequent answer tokens.
class MockTrainingBackend final : public TrainingBackend {
 public:
  std::string id() const override { return "mock"; }
  ModelArtifact train_stage(const StageJob& job) override;
  std::vector<std::string> predict(const ModelArtifact& artifact,
                                   const std::vector<PredictionQuery>& queries) override;
};

// Adapter for a real finetuning stack: spawns `command`, feeds one JSON job
// description on stdin and reads one JSON reply from stdout.
//
//   train:   {"op":"train", "plan_id", "stage_index", "epochs", "config",
//             "examples":[qa records], "parent_weights_path"?, "data_digest"}
//         -> {"weights": str blob} or {"weights_path": str},
//            optional "loss": [[step, loss], ...]
//   predict: {"op":"predict", "weights_path", "queries":[{context, question}]}
//         -> {"answers": [str, ...]}
//
// Whether stage 2 reuses optimizer state or restarts the schedule is the
// stack's business; both are expressible in `extra_args`.
class SubprocessTrainingBackend final : public TrainingBackend {
 public:
  explicit SubprocessTrainingBackend(std::vector<std::string> command,
                                     std::vector<std::string> extra_args = {});
  std::string id() const override { return "subprocess"; }
  ModelArtifact train_stage(const StageJob& job) override;
  std::vector<std::string> predict(const ModelArtifact& artifact,
                                   const std::vector<PredictionQuery>& queries) override;

 private:
  std::string run_job(const std::string& job_json) const;
  std::vector<std::string> command_;
};

// --- Plan execution ------------------------------------------------------------

using SplitResolver = std::map<std::string, const DatasetSplit*>;

struct StageRun {
  int stage_index = 1;
  std::string artifact_id;
  std::optional<std::string> parent_id;
  size_t instances = 0;
  int epochs = 1;
  int64_t steps_per_epoch = 0;
  int64_t total_steps = 0;
  std::string data_digest;
  std::string loss_log;  // path relative to the run directory
};

struct RunResult {
  std::vector<ModelArtifact> artifacts;  // one per completed stage, chained
  std::vector<StageRun> stage_runs;
  std::filesystem::path manifest_path;
  bool failed = false;
  std::optional<std::string> error;
};

// Executes the plan's stages strictly sequentially against `backend`,
// verifying each mixture entry's split digest. Every run writes
// <run_dir>/manifest.json (paths inside are run_dir-relative, so identical
// runs are byte-identical wherever they land); a mid-plan backend failure
// leaves a partial manifest with a failed-stage marker and unrun later
// stages. `resume_from`, when set, seeds stage 1 with an existing checkpoint
// instead of starting from the base model.
RunResult run_plan(const TrainingPlan& plan, const SplitResolver& splits,
                   const TrainerConfig& config, TrainingBackend& backend,
                   const std::filesystem::path& run_dir,
                   const std::optional<ModelArtifact>& resume_from = std::nullopt);

// Order-preserving batch prediction.
std::vector<std::string> predict(const ModelArtifact& artifact,
                                 const std::vector<PredictionQuery>& queries,
                                 TrainingBackend& backend);

// Predicts an answer for every pair of `split` (context text + question) and
// returns prediction rows in split pair order.
std::vector<PredictionRow> predict_split(const ModelArtifact& artifact, const DatasetSplit& split,
                                         TrainingBackend& backend);

}  // namespace vatika
