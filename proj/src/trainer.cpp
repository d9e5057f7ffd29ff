#include "vatika/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"
#include "vatika/metrics.hpp"
#include "vatika/rng.hpp"
#include "vatika/sha256.hpp"

namespace vatika {

using nlohmann::json;
namespace fs = std::filesystem;

// --- TrainerConfig -----------------------------------------------------------

std::string TrainerConfig::to_json() const {
  json j{{"max_sequence_length", max_sequence_length},
         {"per_device_batch_size", per_device_batch_size},
         {"gradient_accumulation_steps", gradient_accumulation_steps},
         {"warmup_steps", warmup_steps},
         {"lr_scheduler", lr_scheduler},
         {"learning_rate", learning_rate ? json(*learning_rate) : json(nullptr)},
         {"model_id", model_id},
         {"seed", seed}};
  return j.dump();
}

TrainerConfig TrainerConfig::from_json(std::string_view text) {
  json j = json::parse(text);
  TrainerConfig c;
  c.max_sequence_length = j.value("max_sequence_length", c.max_sequence_length);
  c.per_device_batch_size = j.value("per_device_batch_size", c.per_device_batch_size);
  c.gradient_accumulation_steps =
      j.value("gradient_accumulation_steps", c.gradient_accumulation_steps);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.lr_scheduler = j.value("lr_scheduler", c.lr_scheduler);
  if (j.contains("learning_rate") && !j["learning_rate"].is_null())
    c.learning_rate = j["learning_rate"].get<double>();
  c.model_id = j.value("model_id", c.model_id);
  c.seed = j.value("seed", c.seed);
  return c;
}

std::string TrainerConfig::digest() const { return sha256_hex(to_json()); }

int64_t steps_per_epoch(size_t instances, const TrainerConfig& config) {
  const int batch = config.effective_batch_size();
  if (batch <= 0) throw ValidationError("effective batch size must be positive");
  return int64_t((instances + size_t(batch) - 1) / size_t(batch));
}

// --- Mock backend ---------------------------------------------------------------

namespace {

json load_weights(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw BackendError("unknown artifact: cannot open weights at " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("corrupt weights blob: ") + e.what());
  }
  return j;
}

std::vector<LossPoint> synthetic_loss_curve(int64_t total_steps, const std::string& data_digest,
                                            const TrainerConfig& config) {
  std::mt19937_64 rng(mix_seed(fnv1a64(data_digest), mix_seed(fnv1a64(config.to_json()), config.seed)));
  std::vector<LossPoint> log;
  if (total_steps <= 0) return log;
  const int64_t stride = std::max<int64_t>(1, total_steps / 200);
  double loss = 2.5 + double(rng() % 2000) / 1000.0;  // start in [2.5, 4.5)
  for (int64_t step = 1; step <= total_steps; ++step) {
    loss *= 0.90 + double(rng() % 1000) / 10000.0;  // factor in [0.90, 1.00)
    if (step % stride == 0 || step == total_steps) log.push_back({step, loss});
  }
  return log;
}

fs::path weights_file(const fs::path& dir, const std::string& digest) {
  return dir / ("model-" + digest.substr(0, 16) + ".json");
}

}  // namespace

ModelArtifact MockTrainingBackend::train_stage(const StageJob& job) {
  json weights;
  if (job.parent) {
    weights = load_weights(job.parent->weights_path);
  } else {
    weights = json{{"qa", json::object()}, {"freq", json::object()}};
  }

  json& qa = weights["qa"];
  json& freq = weights["freq"];
  for (const QAPair& p : job.examples) {
    if (!p.answer) throw BackendError("training example '" + p.pair_id + "' has no answer");
    qa[p.question] = *p.answer;
    for (const std::string& token : tokenize_hindi(*p.answer).tokens) {
      freq[token] = freq.value(token, 0) + 1;
    }
  }

  const std::string blob = weights.dump();
  const std::string digest = sha256_hex(blob);

  fs::create_directories(job.artifact_dir);
  const fs::path path = weights_file(job.artifact_dir, digest);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw BackendError("cannot write weights blob: " + path.string());
    out << blob;
  }

  ModelArtifact artifact;
  artifact.artifact_id = digest;
  artifact.parent_id = job.parent ? std::optional(job.parent->artifact_id) : std::nullopt;
  artifact.plan_id = job.plan_id;
  artifact.stage_index = job.stage_index;
  artifact.weights_digest = digest;
  artifact.weights_path = path;
  artifact.metrics_log =
      synthetic_loss_curve(steps_per_epoch(job.examples.size(), job.config) * job.epochs,
                           job.data_digest, job.config);
  return artifact;
}

std::vector<std::string> MockTrainingBackend::predict(const ModelArtifact& artifact,
                                                      const std::vector<PredictionQuery>& queries) {
  const json weights = load_weights(artifact.weights_path);
  const json& qa = weights.at("qa");
  const json& freq = weights.at("freq");

  // Fallback: the 8 most frequent answer tokens (count desc, token asc).
  std::vector<std::pair<std::string, long>> tokens;
  for (auto it = freq.begin(); it != freq.end(); ++it)
    tokens.emplace_back(it.key(), it.value().get<long>());
  std::sort(tokens.begin(), tokens.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::string fallback;
  for (size_t i = 0; i < tokens.size() && i < 8; ++i) {
    if (!fallback.empty()) fallback += ' ';
    fallback += tokens[i].first;
  }
  if (fallback.empty()) fallback = "अनुत्तरित";

  std::vector<std::string> answers;
  answers.reserve(queries.size());
  for (const PredictionQuery& q : queries) {
    auto it = qa.find(q.question);
    answers.push_back(it != qa.end() ? it->get<std::string>() : fallback);
  }
  return answers;
}

// --- Subprocess backend -----------------------------------------------------------

SubprocessTrainingBackend::SubprocessTrainingBackend(std::vector<std::string> command,
                                                     std::vector<std::string> extra_args)
    : command_(std::move(command)) {
  command_.insert(command_.end(), extra_args.begin(), extra_args.end());
  if (command_.empty()) throw ValidationError("subprocess backend needs a command");
}

std::string SubprocessTrainingBackend::run_job(const std::string& job_json) const {
  // Job and reply go through temp files redirected onto the child's
  // stdin/stdout; that keeps arbitrarily large jobs deadlock-free.
  const fs::path dir = fs::temp_directory_path();
  const std::string tag = std::to_string(::getpid()) + "-" + std::to_string(fnv1a64(job_json));
  const fs::path in_path = dir / ("vatika-job-" + tag + ".json");
  const fs::path out_path = dir / ("vatika-out-" + tag + ".json");
  {
    std::ofstream out(in_path, std::ios::binary | std::ios::trunc);
    out << job_json;
  }

  const pid_t pid = ::fork();
  if (pid < 0) throw BackendError("fork failed");
  if (pid == 0) {
    if (!::freopen(in_path.c_str(), "r", stdin) || !::freopen(out_path.c_str(), "w", stdout))
      ::_exit(127);
    std::vector<char*> argv;
    argv.reserve(command_.size() + 1);
    for (const std::string& arg : command_) argv.push_back(const_cast<char*>(arg.c_str()));
    argv.push_back(nullptr);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }

  int status = 0;
  if (::waitpid(pid, &status, 0) < 0) throw BackendError("waitpid failed");
  std::string reply;
  {
    std::ifstream in(out_path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    reply = buf.str();
  }
  std::error_code ec;
  fs::remove(in_path, ec);
  fs::remove(out_path, ec);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw BackendError("training subprocess exited with status " +
                       std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  return reply;
}

ModelArtifact SubprocessTrainingBackend::train_stage(const StageJob& job) {
  json examples = json::array();
  for (const QAPair& p : job.examples) examples.push_back(json::parse(qa_record_json(p)));
  json req{{"op", "train"},
           {"plan_id", job.plan_id},
           {"stage_index", job.stage_index},
           {"epochs", job.epochs},
           {"config", json::parse(job.config.to_json())},
           {"examples", std::move(examples)},
           {"data_digest", job.data_digest}};
  if (job.parent) req["parent_weights_path"] = job.parent->weights_path.string();

  json reply;
  try {
    reply = json::parse(run_job(req.dump()));
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("training subprocess returned invalid JSON: ") + e.what());
  }

  std::string blob;
  if (reply.contains("weights")) {
    blob = reply["weights"].get<std::string>();
  } else if (reply.contains("weights_path")) {
    std::ifstream in(reply["weights_path"].get<std::string>(), std::ios::binary);
    if (!in) throw BackendError("subprocess reply points at unreadable weights");
    std::ostringstream buf;
    buf << in.rdbuf();
    blob = buf.str();
  } else {
    throw BackendError("subprocess reply has neither 'weights' nor 'weights_path'");
  }

  const std::string digest = sha256_hex(blob);
  fs::create_directories(job.artifact_dir);
  const fs::path path = weights_file(job.artifact_dir, digest);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << blob;
  }

  ModelArtifact artifact;
  artifact.artifact_id = digest;
  artifact.parent_id = job.parent ? std::optional(job.parent->artifact_id) : std::nullopt;
  artifact.plan_id = job.plan_id;
  artifact.stage_index = job.stage_index;
  artifact.weights_digest = digest;
  artifact.weights_path = path;
  if (reply.contains("loss")) {
    for (const json& point : reply["loss"])
      artifact.metrics_log.push_back({point.at(0).get<int64_t>(), point.at(1).get<double>()});
  }
  return artifact;
}

std::vector<std::string> SubprocessTrainingBackend::predict(
    const ModelArtifact& artifact, const std::vector<PredictionQuery>& queries) {
  json qs = json::array();
  for (const PredictionQuery& q : queries)
    qs.push_back({{"context", q.context}, {"question", q.question}});
  json req{{"op", "predict"}, {"weights_path", artifact.weights_path.string()}, {"queries", qs}};
  json reply;
  try {
    reply = json::parse(run_job(req.dump()));
  } catch (const json::parse_error& e) {
    throw BackendError(std::string("predict subprocess returned invalid JSON: ") + e.what());
  }
  if (!reply.contains("answers") || !reply["answers"].is_array())
    throw BackendError("predict reply missing 'answers'");
  std::vector<std::string> answers;
  for (const json& a : reply["answers"]) answers.push_back(a.get<std::string>());
  if (answers.size() != queries.size())
    throw BackendError("predict reply has " + std::to_string(answers.size()) + " answers for " +
                       std::to_string(queries.size()) + " queries");
  return answers;
}

// --- Plan execution -----------------------------------------------------------------

namespace {

std::string stage_data_digest(const std::vector<QAPair>& examples) {
  Sha256 h;
  for (const QAPair& p : examples) {
    h.update(qa_record_json(p));
    h.update("\n");
  }
  return h.hex_digest();
}

void write_loss_log(const fs::path& path, const std::vector<LossPoint>& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write loss log: " + path.string());
  for (const LossPoint& p : log) {
    out << json{{"step", p.step}, {"loss", p.loss}}.dump() << '\n';
  }
}

}  // namespace

RunResult run_plan(const TrainingPlan& plan, const SplitResolver& splits,
                   const TrainerConfig& config, TrainingBackend& backend,
                   const fs::path& run_dir, const std::optional<ModelArtifact>& resume_from) {
  const PlanValidationReport report = validate_plan(plan);
  if (!report.ok()) {
    std::string msg = "plan '" + plan.plan_id + "' is invalid:";
    for (const std::string& v : report.violations) msg += "\n  - " + v;
    throw ValidationError(msg);
  }
  if (!config.learning_rate)
    throw ValidationError("learning_rate is not set; it has no default and must be given explicitly");

  fs::create_directories(run_dir);
  const fs::path artifact_dir = run_dir / "artifacts";

  RunResult result;
  json stages_json = json::array();

  for (const TrainingStage& stage : plan.stages) {
    // Resolve and verify every mixture entry before touching the backend.
    std::vector<QAPair> examples;
    for (const MixtureEntry& entry : stage.mixture) {
      auto it = splits.find(entry.split_name);
      if (it == splits.end() || it->second == nullptr)
        throw ValidationError("plan references unknown split '" + entry.split_name + "'");
      const DatasetSplit& split = *it->second;
      const std::string digest = dataset_digest(split);
      if (digest != entry.digest)
        throw ValidationError("split '" + entry.split_name + "' digest mismatch (plan " +
                              entry.digest.substr(0, 12) + "…, loaded " + digest.substr(0, 12) +
                              "…); the data changed since the plan was built");
      if (split.pairs().size() != entry.instances)
        throw ValidationError("split '" + entry.split_name + "' instance count mismatch");
      examples.insert(examples.end(), split.pairs().begin(), split.pairs().end());
    }
    seeded_shuffle(examples, mix_seed(plan.shuffle_seed, uint64_t(stage.stage_index)));

    StageJob job;
    job.plan_id = plan.plan_id;
    job.stage_index = stage.stage_index;
    job.epochs = stage.epochs;
    job.config = config;
    job.data_digest = stage_data_digest(examples);
    job.examples = std::move(examples);
    job.artifact_dir = artifact_dir;
    if (!result.artifacts.empty())
      job.parent = result.artifacts.back();
    else if (resume_from)
      job.parent = *resume_from;

    StageRun run;
    run.stage_index = stage.stage_index;
    run.instances = job.examples.size();
    run.epochs = stage.epochs;
    run.steps_per_epoch = steps_per_epoch(job.examples.size(), config);
    run.total_steps = run.steps_per_epoch * stage.epochs;
    run.data_digest = job.data_digest;

    try {
      ModelArtifact artifact = backend.train_stage(job);
      run.artifact_id = artifact.artifact_id;
      run.parent_id = artifact.parent_id;
      run.loss_log = "stage" + std::to_string(stage.stage_index) + ".loss.jsonl";
      write_loss_log(run_dir / run.loss_log, artifact.metrics_log);
      result.artifacts.push_back(std::move(artifact));
      result.stage_runs.push_back(run);
    } catch (const BackendError& e) {
      result.failed = true;
      result.error = "stage " + std::to_string(stage.stage_index) + ": " + e.what();
      break;
    }
  }

  for (const StageRun& run : result.stage_runs) {
    stages_json.push_back(
        {{"stage_index", run.stage_index},
         {"artifact_id", run.artifact_id},
         {"parent_id", run.parent_id ? json(*run.parent_id) : json(nullptr)},
         {"instances", run.instances},
         {"epochs", run.epochs},
         {"steps_per_epoch", run.steps_per_epoch},
         {"total_steps", run.total_steps},
         {"data_digest", run.data_digest},
         {"loss_log", run.loss_log}});
  }

  json manifest{{"plan_id", plan.plan_id},
                {"plan_digest", plan.digest()},
                {"backend", backend.id()},
                {"config", json::parse(config.to_json())},
                {"shuffle_seed", plan.shuffle_seed},
                {"stages", std::move(stages_json)},
                {"status", result.failed ? "failed" : "ok"}};
  if (resume_from) manifest["resumed_from"] = resume_from->artifact_id;
  if (result.failed) {
    manifest["failed_stage"] = int(result.stage_runs.size()) + 1;
    manifest["error"] = *result.error;
  }

  result.manifest_path = run_dir / "manifest.json";
  std::ofstream out(result.manifest_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write run manifest: " + result.manifest_path.string());
  out << manifest.dump(2) << '\n';
  return result;
}

std::vector<std::string> predict(const ModelArtifact& artifact,
                                 const std::vector<PredictionQuery>& queries,
                                 TrainingBackend& backend) {
  if (queries.empty()) return {};
  return backend.predict(artifact, queries);
}

std::vector<PredictionRow> predict_split(const ModelArtifact& artifact, const DatasetSplit& split,
                                         TrainingBackend& backend) {
  std::vector<PredictionQuery> queries;
  queries.reserve(split.pairs().size());
  for (const QAPair& p : split.pairs()) {
    const ContextRecord* ctx = split.find_context(p.context_id);
    queries.push_back({ctx ? ctx->text : std::string(), p.question});
  }
  const std::vector<std::string> answers = predict(artifact, queries, backend);
  std::vector<PredictionRow> rows;
  rows.reserve(answers.size());
  for (size_t i = 0; i < answers.size(); ++i)
    rows.push_back({split.pairs()[i].pair_id, answers[i]});
  return rows;
}

}  // namespace vatika
