#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vatika/errors.hpp"
#include "vatika/metrics.hpp"
#include "vatika/mixtures.hpp"
#include "vatika/pipeline.hpp"
#include "vatika/report.hpp"
#include "vatika/synthgen.hpp"
#include "vatika/trainer.hpp"

namespace fs = std::filesystem;
using namespace vatika;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitBackend = 2;
constexpr int kExitPartial = 3;

void write_or_print(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + out_path);
  out << content;
}

// Split name defaults to the file stem: data/train.jsonl -> "train".
std::string split_name_for(const fs::path& path, const std::vector<std::string>& names, size_t i) {
  if (i < names.size()) return names[i];
  return path.stem().string();
}

MetricSelection parse_metric_list(const std::vector<std::string>& names) {
  if (names.empty()) return MetricSelection{};
  MetricSelection sel;
  sel.rouge1 = sel.rouge2 = sel.rougeL = sel.bleu = sel.bleu1 = sel.bleu2 = sel.qa_f1 = false;
  sel.bertscore = false;
  for (const std::string& name : names) {
    if (name == "rouge1") sel.rouge1 = true;
    else if (name == "rouge2") sel.rouge2 = true;
    else if (name == "rougeL" || name == "rouge_l") sel.rougeL = true;
    else if (name == "bleu") sel.bleu = true;
    else if (name == "bleu1") sel.bleu1 = true;
    else if (name == "bleu2") sel.bleu2 = true;
    else if (name == "qa_f1") sel.qa_f1 = true;
    else if (name == "bertscore") sel.bertscore = true;
    else throw ValidationError("unknown metric '" + name + "'");
  }
  return sel;
}

int run(int argc, char** argv) {
  CLI::App app{"Toolkit for adapting small language models to low-resource QA domains: "
               "synthetic data generation, staged finetuning plans, Devanagari-aware evaluation"};
  app.require_subcommand(1);

  // --- stats ---
  auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics table (one row per split)");
  std::vector<std::string> stats_paths, stats_names;
  std::string stats_format = "md";
  stats_cmd->add_option("paths", stats_paths, "Dataset JSONL files")->required()->expected(-1);
  stats_cmd->add_option("--name", stats_names, "Split display names (parallel to paths)");
  stats_cmd->add_option("--format", stats_format, "md or csv")->check(CLI::IsMember({"md", "csv"}));

  // --- generate ---
  auto* gen_cmd = app.add_subcommand("generate", "Run a synthetic QA generation campaign");
  std::string gen_backend_kind = "mock", gen_backend_id = "mock-lm";
  std::string gen_original, gen_out, gen_manifest, gen_split_name;
  std::string gen_host, gen_http_path = "/v1/complete";
  int gen_port = 0, gen_pairs = 5, gen_workers = 2;
  GenerationConfig gen_config;
  bool gen_dedup = false;
  double gen_dedup_threshold = 0.9;
  uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen_cmd->add_option("--backend", gen_backend_kind, "mock or http")
      ->check(CLI::IsMember({"mock", "http"}));
  gen_cmd->add_option("--backend-id", gen_backend_id, "Generator identity recorded on pairs");
  gen_cmd->add_option("--original", gen_original, "Training split JSONL (contexts + exemplars)")
      ->required();
  gen_cmd->add_option("--out", gen_out, "Output synthetic split JSONL")->required();
  gen_cmd->add_option("--temperature", gen_config.temperature, "Sampling temperature");
  gen_cmd->add_option("--top-p", gen_config.top_p, "Nucleus sampling cutoff");
  gen_cmd->add_option("--fewshot", gen_config.num_fewshot, "Few-shot exemplar count");
  gen_cmd->add_option("--max-new-tokens", gen_config.max_new_tokens, "Completion budget");
  gen_cmd->add_option("--retries", gen_config.max_attempts, "Attempts per context");
  gen_cmd->add_option("--seed", gen_seed, "Campaign seed (reproducible manifests)")
      ->each([&](const std::string&) { gen_seed_set = true; });
  gen_cmd->add_option("--pairs-per-context", gen_pairs, "Mock backend: pairs per context");
  gen_cmd->add_option("--manifest", gen_manifest, "Campaign manifest JSONL path");
  gen_cmd->add_option("--split-name", gen_split_name, "Name for the synthetic split");
  gen_cmd->add_option("--workers", gen_workers, "Generation worker pool width");
  gen_cmd->add_flag("--dedup", gen_dedup, "Enable the near-duplicate filter");
  gen_cmd->add_option("--dedup-threshold", gen_dedup_threshold, "Jaccard threshold in [0,1]");
  gen_cmd->add_option("--host", gen_host, "HTTP backend host");
  gen_cmd->add_option("--port", gen_port, "HTTP backend port");
  gen_cmd->add_option("--path", gen_http_path, "HTTP backend route");

  // --- mix ---
  auto* mix_cmd = app.add_subcommand("mix", "Build a staged training plan");
  std::string mix_strategy, mix_original, mix_out;
  std::vector<std::string> mix_synthetic;
  uint64_t mix_seed = 0;
  mix_cmd->add_option("--strategy", mix_strategy, "m1, m2 or m3")
      ->required()
      ->check(CLI::IsMember({"m1", "m2", "m3"}));
  mix_cmd->add_option("--original", mix_original, "Original split JSONL")->required();
  mix_cmd->add_option("--synthetic", mix_synthetic, "Synthetic split JSONL (repeatable)");
  mix_cmd->add_option("--out", mix_out, "Plan JSON output path")->required();
  mix_cmd->add_option("--seed", mix_seed, "Within-stage shuffle seed recorded in the plan");

  // --- train ---
  auto* train_cmd = app.add_subcommand("train", "Execute a training plan");
  std::string train_plan_path, train_trainer = "mock", train_out_dir = "run";
  std::vector<std::string> train_command, train_split_overrides;
  double train_lr = 0.0;
  bool train_lr_set = false;
  uint64_t train_seed = 0;
  std::string train_model_id = "mock-slm";
  train_cmd->add_option("--plan", train_plan_path, "Plan JSON")->required();
  train_cmd->add_option("--trainer", train_trainer, "mock or adapter")
      ->check(CLI::IsMember({"mock", "adapter"}));
  train_cmd->add_option("--lr", train_lr, "Learning rate (required; no default)")
      ->each([&](const std::string&) { train_lr_set = true; });
  train_cmd->add_option("--model-id", train_model_id, "Base model identifier");
  train_cmd->add_option("--out-dir", train_out_dir, "Run directory (manifest, artifacts)");
  train_cmd->add_option("--seed", train_seed, "Trainer seed");
  train_cmd->add_option("--command", train_command, "Adapter trainer command + args");
  train_cmd->add_option("--split", train_split_overrides,
                        "Override a split path as name=path (repeatable)");
  std::string train_resume_weights, train_resume_id;
  train_cmd->add_option("--resume-weights", train_resume_weights,
                        "Start stage 1 from this checkpoint blob instead of the base model");
  train_cmd->add_option("--resume-id", train_resume_id,
                        "Checkpoint id recorded for --resume-weights");

  // --- evaluate ---
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against a gold split");
  std::string eval_predictions, eval_gold, eval_gold_name = "gold", eval_out;
  std::string eval_per_example_csv, eval_per_example_jsonl;
  std::vector<std::string> eval_metrics;
  int eval_bleu_max_n = 4;
  bool eval_naive = false;
  eval_cmd->add_option("--predictions", eval_predictions, "Prediction JSONL")->required();
  eval_cmd->add_option("--gold", eval_gold, "Gold split JSONL")->required();
  eval_cmd->add_option("--gold-name", eval_gold_name, "Split name for error messages");
  eval_cmd->add_option("--metrics", eval_metrics,
                       "Metric list: rouge1 rouge2 rougeL bleu bleu1 bleu2 qa_f1 bertscore");
  eval_cmd->add_option("--bleu-max-n", eval_bleu_max_n, "N-gram order for the BLEU column");
  eval_cmd->add_flag("--naive-tokenize", eval_naive, "Plain whitespace tokenization");
  eval_cmd->add_option("--out", eval_out, "Metric report JSON path (stdout otherwise)");
  eval_cmd->add_option("--per-example-csv", eval_per_example_csv, "Per-example scores as CSV");
  eval_cmd->add_option("--per-example-jsonl", eval_per_example_jsonl,
                       "Per-example scores as JSONL");

  // --- report ---
  auto* report_cmd = app.add_subcommand("report", "Render a comparison table from stored reports");
  std::string report_registry, report_style = "summary", report_format = "md", report_out;
  std::vector<std::string> report_runs, report_splits;
  report_cmd->add_option("--registry", report_registry, "Registry root directory")->required();
  report_cmd->add_option("--runs", report_runs, "Run ids")->required();
  report_cmd->add_option("--splits", report_splits, "Split names")->required();
  report_cmd->add_option("--style", report_style, "summary or competition")
      ->check(CLI::IsMember({"summary", "competition"}));
  report_cmd->add_option("--format", report_format, "md or csv")
      ->check(CLI::IsMember({"md", "csv"}));
  report_cmd->add_option("--out", report_out, "Output path (stdout otherwise)");

  // --- pipeline ---
  auto* pipe_cmd = app.add_subcommand("pipeline", "generate -> mix -> train -> evaluate -> report");
  std::string pipe_config_path, pipe_registry_root;
  double pipe_lr = 0.0;
  bool pipe_lr_set = false;
  pipe_cmd->add_option("--config", pipe_config_path, "Pipeline config JSON")->required();
  pipe_cmd->add_option("--registry-root", pipe_registry_root, "Override the registry root");
  pipe_cmd->add_option("--lr", pipe_lr, "Override training.learning_rate")
      ->each([&](const std::string&) { pipe_lr_set = true; });

  CLI11_PARSE(app, argc, argv);

  if (stats_cmd->parsed()) {
    std::vector<StatsRow> rows;
    for (size_t i = 0; i < stats_paths.size(); ++i) {
      const std::string name = split_name_for(stats_paths[i], stats_names, i);
      const DatasetSplit split = ingest_dataset(stats_paths[i], name);
      rows.push_back({name, compute_statistics(split)});
    }
    std::cout << (stats_format == "csv" ? render_stats_csv(rows) : render_stats_markdown(rows));
    return kExitOk;
  }

  if (gen_cmd->parsed()) {
    gen_config.backend_id = gen_backend_id;
    if (gen_seed_set) gen_config.seed = gen_seed;
    std::unique_ptr<GenerationBackend> backend;
    if (gen_backend_kind == "mock") {
      MockGenerationBackend::Behavior behavior;
      behavior.pairs_per_context = gen_pairs;
      backend = std::make_unique<MockGenerationBackend>(gen_backend_id, behavior);
    } else {
      if (gen_host.empty() || gen_port == 0)
        throw ValidationError("http backend needs --host and --port");
      backend = std::make_unique<HttpGenerationBackend>(gen_backend_id, gen_host, gen_port,
                                                        gen_http_path);
    }
    const DatasetSplit original = ingest_dataset(gen_original, "train");
    CampaignOptions options;
    options.split_name = gen_split_name;
    options.workers = gen_workers;
    options.dedup_enabled = gen_dedup;
    options.dedup_threshold = gen_dedup_threshold;
    if (!gen_manifest.empty()) options.manifest_path = gen_manifest;

    const CampaignResult campaign =
        run_generation_campaign(original, gen_config, *backend, original, options);
    write_dataset(campaign.synthetic, gen_out);
    for (const CampaignFailure& f : campaign.failures)
      std::cerr << "context " << f.context_id << " failed: " << f.error << "\n";
    std::cout << campaign.synthetic.pairs().size() << " synthetic pairs -> " << gen_out
              << " (manifest digest " << campaign.manifest_digest << ")\n";
    if (!campaign.failures.empty() && campaign.synthetic.pairs().empty()) return kExitBackend;
    if (!campaign.failures.empty()) return kExitPartial;
    return kExitOk;
  }

  if (mix_cmd->parsed()) {
    const DatasetSplit original = ingest_dataset(mix_original, "train");
    TrainingPlan plan;
    if (mix_strategy == "m1") {
      plan = plan_m1(original, mix_seed, mix_original);
    } else if (mix_strategy == "m2") {
      if (mix_synthetic.size() != 1)
        throw ValidationError("m2 takes exactly one --synthetic split");
      const DatasetSplit synth =
          ingest_dataset(mix_synthetic[0], fs::path(mix_synthetic[0]).stem().string());
      plan = plan_m2(original, synth, mix_seed, mix_original, mix_synthetic[0]);
    } else {
      std::vector<DatasetSplit> sets;
      for (const std::string& path : mix_synthetic)
        sets.push_back(ingest_dataset(path, fs::path(path).stem().string()));
      plan = plan_m3(original, sets, mix_seed, mix_original, mix_synthetic);
    }
    plan.save(mix_out);
    std::cout << "plan " << plan.plan_id << " -> " << mix_out << "\n";
    return kExitOk;
  }

  if (train_cmd->parsed()) {
    if (!train_lr_set)
      throw ValidationError("--lr is required: the learning rate has no default");
    const TrainingPlan plan = TrainingPlan::load(train_plan_path);

    std::map<std::string, std::string> overrides;
    for (const std::string& spec : train_split_overrides) {
      const size_t eq = spec.find('=');
      if (eq == std::string::npos)
        throw ValidationError("--split expects name=path, got '" + spec + "'");
      overrides[spec.substr(0, eq)] = spec.substr(eq + 1);
    }

    std::map<std::string, DatasetSplit> loaded;
    SplitResolver resolver;
    for (const TrainingStage& stage : plan.stages) {
      for (const MixtureEntry& entry : stage.mixture) {
        if (loaded.count(entry.split_name)) continue;
        std::string path = entry.path;
        if (auto it = overrides.find(entry.split_name); it != overrides.end()) path = it->second;
        if (path.empty())
          throw ValidationError("plan entry '" + entry.split_name +
                                "' has no path; supply --split " + entry.split_name + "=<path>");
        loaded.emplace(entry.split_name, ingest_dataset(path, entry.split_name));
      }
    }
    for (const auto& [name, split] : loaded) resolver[name] = &split;

    TrainerConfig config;
    config.learning_rate = train_lr;
    config.model_id = train_model_id;
    config.seed = train_seed;

    std::unique_ptr<TrainingBackend> backend;
    if (train_trainer == "mock") {
      backend = std::make_unique<MockTrainingBackend>();
    } else {
      if (train_command.empty())
        throw ValidationError("adapter trainer needs --command");
      backend = std::make_unique<SubprocessTrainingBackend>(train_command);
    }

    std::optional<ModelArtifact> resume;
    if (!train_resume_weights.empty()) {
      ModelArtifact checkpoint;
      checkpoint.weights_path = train_resume_weights;
      checkpoint.artifact_id = train_resume_id.empty() ? train_resume_weights : train_resume_id;
      resume = std::move(checkpoint);
    }

    const RunResult run = run_plan(plan, resolver, config, *backend, train_out_dir, resume);
    if (run.failed) {
      std::cerr << *run.error << "\n";
      return run.artifacts.empty() ? kExitBackend : kExitPartial;
    }
    for (const ModelArtifact& a : run.artifacts)
      std::cout << "stage " << a.stage_index << ": artifact " << a.artifact_id << "\n";
    std::cout << "manifest -> " << run.manifest_path.string() << "\n";
    return kExitOk;
  }

  if (eval_cmd->parsed()) {
    const DatasetSplit gold = ingest_dataset(eval_gold, eval_gold_name);
    const std::vector<PredictionRow> rows = read_predictions(eval_predictions);
    MetricSelection selection = parse_metric_list(eval_metrics);
    selection.bleu_max_n = eval_bleu_max_n;
    selection.naive_whitespace = eval_naive;
    HashEmbedder embedder;
    const MetricReport report = evaluate_split(rows, gold, selection, &embedder);
    write_or_print(report.to_json(), eval_out);
    if (!eval_per_example_csv.empty()) write_or_print(report.per_example_csv(), eval_per_example_csv);
    if (!eval_per_example_jsonl.empty())
      write_or_print(report.per_example_jsonl(), eval_per_example_jsonl);
    return kExitOk;
  }

  if (report_cmd->parsed()) {
    const RunRegistry registry = RunRegistry::open(report_registry);
    const ComparisonTable table = build_comparison(registry, report_runs, report_splits,
                                                   table_style_from_string(report_style));
    for (const std::string& warning : table.warnings) std::cerr << "warning: " << warning << "\n";
    write_or_print(report_format == "csv" ? table.to_csv() : table.to_markdown(), report_out);
    return kExitOk;
  }

  if (pipe_cmd->parsed()) {
    PipelineConfig config = PipelineConfig::load(pipe_config_path);
    if (!pipe_registry_root.empty()) config.registry_root = pipe_registry_root;
    if (pipe_lr_set) config.learning_rate = pipe_lr;
    const PipelineResult result = run_pipeline(config, std::cout);
    if (result.exit_code != 0) std::cerr << "pipeline failed: " << result.error << "\n";
    return result.exit_code;
  }

  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitBackend;
  } catch (const PartialPipelineError& e) {
    std::cerr << "partial pipeline failure: " << e.what() << "\n";
    return kExitPartial;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
