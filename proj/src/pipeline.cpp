#include "vatika/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"
#include "vatika/mixtures.hpp"
#include "vatika/report.hpp"
#include "vatika/trainer.hpp"

namespace vatika {

using nlohmann::json;
namespace fs = std::filesystem;

// --- Config ------------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("invalid pipeline config: ") + e.what());
  }

  PipelineConfig c;
  if (j.contains("registry_root")) c.registry_root = j["registry_root"].get<std::string>();
  if (j.contains("datasets")) {
    const json& ds = j["datasets"];
    for (const auto& [name, path] : ds.items()) c.datasets[name] = path.get<std::string>();
  }
  c.original_split = j.value("original_split", c.original_split);

  if (j.contains("generation")) {
    const json& g = j["generation"];
    c.generation.temperature = g.value("temperature", c.generation.temperature);
    c.generation.top_p = g.value("top_p", c.generation.top_p);
    c.generation.max_new_tokens = g.value("max_new_tokens", c.generation.max_new_tokens);
    c.generation.num_fewshot = g.value("num_fewshot", c.generation.num_fewshot);
    c.generation.max_attempts = g.value("max_attempts", c.generation.max_attempts);
    if (g.contains("instruction")) c.generation.instruction = g["instruction"].get<std::string>();
    if (g.contains("seed")) c.generation.seed = g["seed"].get<uint64_t>();
    c.generation_workers = g.value("workers", c.generation_workers);
    if (g.contains("dedup")) {
      c.dedup_enabled = g["dedup"].value("enabled", false);
      c.dedup_threshold = g["dedup"].value("threshold", c.dedup_threshold);
    }
    for (const json& bj : g.value("backends", json::array())) {
      Backend b;
      b.id = bj.at("id").get<std::string>();
      b.kind = bj.value("kind", b.kind);
      b.pairs_per_context = bj.value("pairs_per_context", b.pairs_per_context);
      b.host = bj.value("host", b.host);
      b.port = bj.value("port", b.port);
      b.path = bj.value("path", b.path);
      c.backends.push_back(std::move(b));
    }
  }

  if (j.contains("training")) {
    const json& t = j["training"];
    if (t.contains("strategies")) {
      c.strategies.clear();
      for (const json& s : t["strategies"]) c.strategies.push_back(s.get<std::string>());
    }
    if (t.contains("learning_rate")) c.learning_rate = t["learning_rate"].get<double>();
    c.model_id = t.value("model_id", c.model_id);
    c.trainer = t.value("trainer", c.trainer);
    for (const json& a : t.value("command", json::array()))
      c.trainer_command.push_back(a.get<std::string>());
    c.trainer_seed = t.value("seed", c.trainer_seed);
    c.shuffle_seed = t.value("shuffle_seed", c.shuffle_seed);
    c.m2_source = t.value("m2_source", c.m2_source);
  }

  if (j.contains("evaluation")) {
    const json& e = j["evaluation"];
    for (const json& s : e.value("splits", json::array()))
      c.eval_splits.push_back(s.get<std::string>());
    if (e.contains("metrics")) {
      MetricSelection sel;
      sel.rouge1 = sel.rouge2 = sel.rougeL = sel.bleu = sel.bleu1 = sel.bleu2 = sel.qa_f1 = false;
      sel.bertscore = false;
      for (const json& m : e["metrics"]) {
        const std::string name = m.get<std::string>();
        if (name == "rouge1") sel.rouge1 = true;
        else if (name == "rouge2") sel.rouge2 = true;
        else if (name == "rougeL") sel.rougeL = true;
        else if (name == "bleu") sel.bleu = true;
        else if (name == "bleu1") sel.bleu1 = true;
        else if (name == "bleu2") sel.bleu2 = true;
        else if (name == "qa_f1") sel.qa_f1 = true;
        else if (name == "bertscore") sel.bertscore = true;
        else throw ValidationError("unknown metric '" + name + "' in pipeline config");
      }
      c.metrics = sel;
    }
    c.metrics.bleu_max_n = e.value("bleu_max_n", c.metrics.bleu_max_n);
    c.metrics.naive_whitespace = e.value("naive_whitespace", c.metrics.naive_whitespace);
    c.metrics.workers = e.value("workers", c.metrics.workers);
  }

  if (j.contains("report")) {
    const json& r = j["report"];
    if (r.contains("styles")) {
      c.report_styles.clear();
      for (const json& s : r["styles"]) c.report_styles.push_back(s.get<std::string>());
    }
    if (r.contains("formats")) {
      c.report_formats.clear();
      for (const json& f : r["formats"]) c.report_formats.push_back(f.get<std::string>());
    }
  }
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open pipeline config: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

// --- Execution ------------------------------------------------------------------

namespace {

std::unique_ptr<GenerationBackend> make_generation_backend(const PipelineConfig::Backend& b,
                                                           uint64_t /*seed*/) {
  if (b.kind == "mock") {
    MockGenerationBackend::Behavior behavior;
    behavior.pairs_per_context = b.pairs_per_context;
    return std::make_unique<MockGenerationBackend>(b.id, behavior);
  }
  if (b.kind == "http") {
    if (b.host.empty() || b.port == 0)
      throw ValidationError("http backend '" + b.id + "' needs host and port");
    return std::make_unique<HttpGenerationBackend>(b.id, b.host, b.port, b.path);
  }
  throw ValidationError("unknown generation backend kind '" + b.kind + "'");
}

std::unique_ptr<TrainingBackend> make_training_backend(const PipelineConfig& config) {
  if (config.trainer == "mock") return std::make_unique<MockTrainingBackend>();
  if (config.trainer == "adapter" || config.trainer == "subprocess") {
    if (config.trainer_command.empty())
      throw ValidationError("adapter trainer needs training.command in the config");
    return std::make_unique<SubprocessTrainingBackend>(config.trainer_command);
  }
  throw ValidationError("unknown trainer '" + config.trainer + "'");
}

struct SyntheticCorpus {
  std::string backend_id;
  DatasetSplit split;
  std::string relative_path;
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& config, std::ostream& log) {
  PipelineResult result;
  bool any_artifact = false;

  try {
    if (config.datasets.empty()) throw ValidationError("pipeline config lists no datasets");
    if (!config.datasets.count(config.original_split))
      throw ValidationError("original split '" + config.original_split +
                            "' is not among the configured datasets");

    RunRegistry registry(config.registry_root);
    const fs::path root = config.registry_root;
    fs::create_directories(root / "datasets");
    fs::create_directories(root / "plans");
    fs::create_directories(root / "runs");
    fs::create_directories(root / "reports");

    // --- ingest ---
    std::map<std::string, DatasetSplit> splits;
    for (const auto& [name, path] : config.datasets) {
      splits.emplace(name, ingest_dataset(path, name));
      log << "[ingest] " << name << ": " << splits.at(name).contexts().size() << " contexts, "
          << splits.at(name).pairs().size() << " pairs\n";
    }
    const DatasetSplit& original = splits.at(config.original_split);

    // --- generate ---
    std::vector<SyntheticCorpus> corpora;
    for (const PipelineConfig::Backend& backend_cfg : config.backends) {
      GenerationConfig gen = config.generation;
      gen.backend_id = backend_cfg.id;
      auto backend = make_generation_backend(backend_cfg, gen.seed.value_or(0));

      CampaignOptions options;
      options.split_name = "synthetic-" + backend_cfg.id;
      options.workers = config.generation_workers;
      options.dedup_enabled = config.dedup_enabled;
      options.dedup_threshold = config.dedup_threshold;
      options.manifest_path = root / "datasets" / ("campaign-" + backend_cfg.id + ".jsonl");

      CampaignResult campaign = run_generation_campaign(original, gen, *backend, original, options);
      for (const CampaignFailure& f : campaign.failures)
        log << "[generate] " << backend_cfg.id << ": context " << f.context_id
            << " failed: " << f.error << "\n";
      log << "[generate] " << backend_cfg.id << ": " << campaign.synthetic.pairs().size()
          << " pairs (manifest " << campaign.manifest_digest.substr(0, 12) << "…)\n";

      const std::string rel = "datasets/" + options.split_name + ".jsonl";
      write_dataset(campaign.synthetic, root / rel);
      corpora.push_back({backend_cfg.id, std::move(campaign.synthetic), rel});
    }

    // --- mix ---
    struct PlannedRun {
      std::string run_id;
      TrainingPlan plan;
      std::string plan_path;  // relative
    };
    std::vector<PlannedRun> planned;

    const std::string original_path = config.datasets.at(config.original_split).string();
    auto synthetic_for_m2 = [&]() -> const SyntheticCorpus& {
      if (corpora.empty())
        throw ValidationError("strategy m2 needs at least one synthetic corpus");
      if (!config.m2_source.empty()) {
        for (const SyntheticCorpus& c : corpora)
          if (c.backend_id == config.m2_source) return c;
        throw ValidationError("m2_source '" + config.m2_source + "' is not a configured backend");
      }
      // Default: the largest corpus (ties broken by backend id).
      const SyntheticCorpus* best = &corpora.front();
      for (const SyntheticCorpus& c : corpora) {
        if (c.split.pairs().size() > best->split.pairs().size() ||
            (c.split.pairs().size() == best->split.pairs().size() && c.backend_id < best->backend_id))
          best = &c;
      }
      return *best;
    };

    for (const std::string& strategy : config.strategies) {
      TrainingPlan plan;
      if (strategy == "m1") {
        plan = plan_m1(original, config.shuffle_seed, original_path);
      } else if (strategy == "m2") {
        const SyntheticCorpus& synth = synthetic_for_m2();
        plan = plan_m2(original, synth.split, config.shuffle_seed, original_path,
                       synth.relative_path);
      } else if (strategy == "m3") {
        std::vector<DatasetSplit> sets;
        std::vector<std::string> paths;
        for (const SyntheticCorpus& c : corpora) {
          sets.push_back(c.split);
          paths.push_back(c.relative_path);
        }
        plan = plan_m3(original, sets, config.shuffle_seed, original_path, paths);
      } else {
        throw ValidationError("unknown strategy '" + strategy + "' (expected m1, m2 or m3)");
      }
      const std::string rel = "plans/" + strategy + ".json";
      plan.save(root / rel);
      log << "[mix] " << strategy << ": plan " << plan.plan_id << ", "
          << plan.stages.size() << " stage(s)\n";
      planned.push_back({strategy, std::move(plan), rel});
    }

    // --- train / evaluate ---
    TrainerConfig trainer_config;
    trainer_config.learning_rate = config.learning_rate;
    trainer_config.model_id = config.model_id;
    trainer_config.seed = config.trainer_seed;
    auto trainer = make_training_backend(config);

    SplitResolver resolver;
    resolver[original.name()] = &original;
    for (const SyntheticCorpus& c : corpora) resolver[c.split.name()] = &c.split;

    HashEmbedder embedder;

    for (const PlannedRun& pr : planned) {
      const fs::path run_dir = root / "runs" / pr.run_id;
      RunResult run = run_plan(pr.plan, resolver, trainer_config, *trainer, run_dir);
      if (run.failed) {
        result.exit_code = any_artifact ? 3 : 2;
        result.error = "training run '" + pr.run_id + "' failed: " + *run.error;
        log << "[train] " << result.error << "\n";
        registry.save();
        result.registry_digest = registry.content_digest();
        return result;
      }
      any_artifact = true;
      log << "[train] " << pr.run_id << ": " << run.artifacts.size() << " artifact(s), final "
          << run.artifacts.back().artifact_id.substr(0, 12) << "…\n";

      RegistryEntry entry;
      entry.run_id = pr.run_id;
      entry.plan_id = pr.plan.plan_id;
      entry.plan_digest = pr.plan.digest();
      entry.plan_path = pr.plan_path;
      entry.manifest_path = "runs/" + pr.run_id + "/manifest.json";

      const ModelArtifact& final_artifact = run.artifacts.back();
      for (const std::string& split_name : config.eval_splits) {
        auto it = splits.find(split_name);
        if (it == splits.end())
          throw ValidationError("evaluation split '" + split_name + "' is not configured");
        const DatasetSplit& gold = it->second;

        const std::vector<PredictionRow> rows = predict_split(final_artifact, gold, *trainer);
        const std::string pred_rel = "runs/" + pr.run_id + "/predictions-" + split_name + ".jsonl";
        write_predictions(rows, root / pred_rel);
        entry.predictions[split_name] = pred_rel;

        const MetricReport report = evaluate_split(rows, gold, config.metrics, &embedder);
        const std::string report_rel = "reports/" + pr.run_id + "-" + split_name + ".metrics.json";
        report.save(root / report_rel);
        entry.reports[split_name] = report_rel;
        log << "[evaluate] " << pr.run_id << " on " << split_name << "\n";
      }
      registry.put(entry);
      result.run_ids.push_back(pr.run_id);
    }

    // --- report ---
    for (const std::string& style_name : config.report_styles) {
      const TableStyle style = table_style_from_string(style_name);
      const ComparisonTable table =
          build_comparison(registry, result.run_ids, config.eval_splits, style);
      for (const std::string& warning : table.warnings) log << "[report] warning: " << warning << "\n";
      for (const std::string& format : config.report_formats) {
        const std::string rel = "reports/comparison-" + style_name + "." + format;
        std::ofstream out(root / rel, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot write report: " + (root / rel).string());
        out << (format == "csv" ? table.to_csv() : table.to_markdown());
      }
    }

    registry.save();
    result.registry_digest = registry.content_digest();
    log << "[done] registry digest " << result.registry_digest << "\n";
    return result;
  } catch (const ValidationError& e) {
    result.exit_code = any_artifact ? 3 : 1;
    result.error = e.what();
    return result;
  } catch (const BackendError& e) {
    result.exit_code = any_artifact ? 3 : 2;
    result.error = e.what();
    return result;
  }
}

}  // namespace vatika
