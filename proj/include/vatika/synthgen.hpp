#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vatika/dataset.hpp"

namespace vatika {

// --- Configuration -----------------------------------------------------------

struct GenerationConfig {
  std::string backend_id;
  double temperature = 0.7;
  double top_p = 0.9;
  int max_new_tokens = 512;
  int num_fewshot = 2;
  std::optional<uint64_t> seed;
  int max_attempts = 3;  // same prompt each retry
  // Placeholder instruction; the wording is deliberately configurable.
  std::string instruction =
      "Read the context and write new question-answer pairs about it in Hindi. "
      "Write each pair as a line starting with \"Q:\" followed by a line starting with \"A:\". "
      "Separate pairs with a blank line.";

  void validate() const;  // throws ValidationError on out-of-range fields
};

// --- Prompts -------------------------------------------------------------------

using Exemplar = std::pair<ContextRecord, std::vector<QAPair>>;

struct PromptBundle {
  std::string system_preamble;
  std::vector<Exemplar> fewshot_examples;
  std::string target_context;
  std::string rendered;
  std::string prompt_hash;  // sha256 of rendered
};

// Canonical Q/A block rendering: "Q: <q>\nA: <a>" blocks separated by blank
// lines. Internal newlines are collapsed to spaces (the grammar is
// line-based). parse_generation inverts this exactly.
std::string render_qa_blocks(const std::vector<std::pair<std::string, std::string>>& pairs);

// Deterministic rendering: preamble, one block per exemplar, then the target
// context exactly once at the end.
PromptBundle build_prompt(const ContextRecord& target, const std::vector<Exemplar>& exemplars,
                          const GenerationConfig& config);

// --- Output parsing --------------------------------------------------------------

// Maximal list of (question, answer) pairs in the Q/A line grammar. Accepts
// optionally numbered markers (Q:, Q1:, a2:); trims whitespace; drops pairs
// with an empty side. Returns an empty list when nothing matches.
std::vector<std::pair<std::string, std::string>> parse_generation(std::string_view raw);

struct ParsedGeneration {
  std::vector<std::pair<std::string, std::string>> pairs;
  size_t question_markers = 0;  // Q-marker lines seen
  size_t rejected = 0;          // orphaned or empty-sided blocks
  bool complete() const { return rejected == 0 && pairs.size() == question_markers; }
};

ParsedGeneration parse_generation_detailed(std::string_view raw);

// --- Backends ----------------------------------------------------------------------

struct BackendRequest {
  std::string prompt;
  double temperature = 0.7;
  double top_p = 0.9;
  int max_new_tokens = 512;
  std::optional<uint64_t> seed;
};

struct BackendResponse {
  std::string completion;
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string id() const = 0;
  // Throws BackendError on transport failure or timeout.
  virtual BackendResponse complete(const BackendRequest& request) = 0;
};

// In-process deterministic backend. Emits `pairs_per_context` canonical Q/A
// blocks derived from the target context (the last "Context:" section of the
// prompt). Behavior knobs simulate the failure modes the campaign must
// tolerate.
class MockGenerationBackend final : public GenerationBackend {
 public:
  struct Behavior {
    int pairs_per_context = 5;
    std::string fail_marker;          // throw while the prompt contains this
    int fail_attempts_per_prompt = 0; // throw on the first N calls per prompt
    bool emit_prose = false;          // markerless free prose
    bool truncate_final_block = false;
  };

  explicit MockGenerationBackend(std::string id);
  MockGenerationBackend(std::string id, Behavior behavior);
  std::string id() const override { return id_; }
  BackendResponse complete(const BackendRequest& request) override;

 private:
  std::string id_;
  Behavior behavior_;
  std::mutex mutex_;
  std::map<std::string, int> attempts_;  // prompt hash -> calls so far
};

// HTTP JSON transport: POST {prompt, temperature, top_p, max_new_tokens, seed}
// to `endpoint`, expecting {"completion": str}. The API key, when the named
// environment variable is set, is sent as a bearer token.
class HttpGenerationBackend final : public GenerationBackend {
 public:
  HttpGenerationBackend(std::string id, std::string host, int port, std::string path = "/v1/complete",
                        std::string api_key_env = "VATIKA_API_KEY", int timeout_seconds = 30);
  std::string id() const override { return id_; }
  BackendResponse complete(const BackendRequest& request) override;

 private:
  std::string id_;
  std::string host_;
  int port_;
  std::string path_;
  std::string api_key_env_;
  int timeout_seconds_;
};

// --- Generation records ------------------------------------------------------------

enum class GenStatus { ok, parse_partial, parse_failed };

std::string_view to_string(GenStatus s);
GenStatus gen_status_from_string(std::string_view s);

struct GenerationRecord {
  std::string context_id;
  std::string prompt_hash;
  std::string backend_id;
  std::string raw_output;
  std::vector<QAPair> parsed_pairs;
  GenStatus status = GenStatus::parse_failed;
  int attempts = 0;
  // Logical sequence number under a seeded campaign (byte-reproducible
  // manifests); wall-clock milliseconds otherwise.
  int64_t timestamp = 0;
  std::optional<std::string> error;
};

// One generation call with retries (same prompt each attempt). Parsed pairs
// carry provenance = synthetic, generator_id = backend id and the sampling
// metadata. status is ok only when at least one pair parsed and no block was
// rejected.
GenerationRecord generate_for_context(const ContextRecord& target, const PromptBundle& bundle,
                                      const GenerationConfig& config, GenerationBackend& backend);

// --- Dedup ---------------------------------------------------------------------------

struct DedupReport {
  size_t kept = 0;
  size_t dropped = 0;
  struct Cluster {
    std::string representative;          // kept pair_id
    std::vector<std::string> duplicates; // dropped pair_ids, in drop order
    double similarity = 0.0;             // max duplicate->representative similarity
  };
  std::vector<Cluster> clusters;
};

// Greedy near-duplicate filter: a pair whose question-token Jaccard
// similarity with an already-kept pair on the same context is >= threshold is
// dropped; first occurrence wins. Question tokens come from tokenize_hindi;
// similarity of two empty token sets is 1.
std::pair<std::vector<QAPair>, DedupReport> dedup_filter(const std::vector<QAPair>& pairs,
                                                         double threshold);

// --- Campaign ----------------------------------------------------------------------------

struct CampaignOptions {
  std::string split_name;  // default: "synthetic-<backend id>"
  std::optional<std::filesystem::path> manifest_path;
  int workers = 2;
  bool dedup_enabled = false;  // off by default; the source corpora were unfiltered
  double dedup_threshold = 0.9;
};

struct CampaignFailure {
  std::string context_id;
  std::string error;
};

struct CampaignResult {
  DatasetSplit synthetic;  // all source contexts + every kept synthetic pair
  std::vector<GenerationRecord> records;  // one per context, input order
  std::vector<CampaignFailure> failures;
  std::optional<DedupReport> dedup;
  std::string manifest;  // JSONL of records
  std::string manifest_digest;
};

// Deterministic exemplar selection: the first `count` answered pairs by
// pair_id whose context differs from `exclude_context_id`, each paired with
// its context.
std::vector<Exemplar> select_exemplars(const DatasetSplit& pool, int count,
                                       std::string_view exclude_context_id);

// Fans per-context generation out to a bounded worker pool; records land in
// input order, so a seeded campaign with a deterministic backend is
// byte-reproducible. Failed contexts are reported, not fatal.
CampaignResult run_generation_campaign(const DatasetSplit& split, const GenerationConfig& config,
                                       GenerationBackend& backend, const DatasetSplit& exemplar_pool,
                                       const CampaignOptions& options = {});

}  // namespace vatika
