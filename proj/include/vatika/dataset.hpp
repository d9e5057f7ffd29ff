#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vatika {

enum class Provenance { original, synthetic };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

// Sampling metadata attached to synthetic pairs.
struct GenerationMeta {
  double temperature = 0.0;
  double top_p = 0.0;
  std::string prompt_hash;

  friend bool operator==(const GenerationMeta&, const GenerationMeta&) = default;
};

struct ContextRecord {
  std::string context_id;
  std::string text;  // NFC-normalized Devanagari-dominant prose
  std::string split_name;

  friend bool operator==(const ContextRecord&, const ContextRecord&) = default;
};

struct QAPair {
  std::string pair_id;
  std::string context_id;
  std::string question;
  std::optional<std::string> answer;  // null for held-out splits
  Provenance provenance = Provenance::original;
  std::optional<std::string> generator_id;
  std::optional<GenerationMeta> generation_meta;

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

// A named, validated collection of contexts and QA pairs. Immutable after
// construction; all operations on it are pure.
class DatasetSplit {
 public:
  DatasetSplit() = default;

  // Validates every invariant (unique ids, non-empty texts/questions,
  // resolvable context references, generator_id on synthetic pairs) and
  // throws ValidationError on the first violation.
  DatasetSplit(std::string name, std::vector<ContextRecord> contexts, std::vector<QAPair> pairs);

  const std::string& name() const { return name_; }
  const std::vector<ContextRecord>& contexts() const { return contexts_; }
  const std::vector<QAPair>& pairs() const { return pairs_; }

  const ContextRecord* find_context(std::string_view context_id) const;
  const QAPair* find_pair(std::string_view pair_id) const;

  // True when every pair carries a non-null answer.
  bool all_answers_present() const;

  friend bool operator==(const DatasetSplit& a, const DatasetSplit& b) {
    return a.name_ == b.name_ && a.contexts_ == b.contexts_ && a.pairs_ == b.pairs_;
  }

 private:
  std::string name_;
  std::vector<ContextRecord> contexts_;
  std::vector<QAPair> pairs_;
  std::unordered_map<std::string, size_t> context_index_;
  std::unordered_map<std::string, size_t> pair_index_;
};

struct SplitStatistics {
  size_t context_count = 0;
  size_t qa_count = 0;
  double qa_per_context = 0.0;  // exact ratio; display rounds to 2 decimals
  double mean_question_len = 0.0;
  std::optional<double> mean_answer_len;  // absent iff any answer is absent
};

using WordSplitter = std::function<std::vector<std::string>(std::string_view)>;

// --- Operations ------------------------------------------------------------

// Reads the JSONL schema (one record per line, kind = "context" | "qa").
// Text fields are NFC-normalized on ingest. Malformed entries raise
// SchemaError with the line number; nothing is silently dropped.
DatasetSplit ingest_dataset(const std::filesystem::path& path, const std::string& split_name);

// Parses JSONL from a string (same schema and errors as ingest_dataset).
DatasetSplit parse_dataset(std::string_view jsonl, const std::string& split_name);

// Canonical serialization: context lines in storage order, then qa lines in
// storage order. ingest(serialize(s)) == s for every valid split.
std::string serialize_dataset(const DatasetSplit& split);

// Single-record JSON lines in the dataset schema (no trailing newline).
std::string context_record_json(const ContextRecord& c);
std::string qa_record_json(const QAPair& p);
void write_dataset(const DatasetSplit& split, const std::filesystem::path& path);

// sha256 of the canonical serialization; used wherever splits are referenced
// tamper-evidently (plans, manifests).
std::string dataset_digest(const DatasetSplit& split);

// Counts are exact; mean lengths use the supplied word splitter
// (whitespace_words by default). Throws DegenerateInputError on a
// zero-context split.
SplitStatistics compute_statistics(const DatasetSplit& split, const WordSplitter& splitter);
SplitStatistics compute_statistics(const DatasetSplit& split);

// Union of contexts (deduplicated by id; identical text required) and pairs.
// pair_ids colliding across source splits are namespaced
// "<source-split>/<pair_id>"; a collision surviving namespacing is an error.
DatasetSplit merge_splits(const std::vector<DatasetSplit>& splits, const std::string& name);

}  // namespace vatika
