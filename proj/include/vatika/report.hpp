#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vatika/dataset.hpp"
#include "vatika/metrics.hpp"

namespace vatika {

// Fixed-point decimal rendering used by every table (snprintf semantics,
// byte-stable).
std::string format_fixed(double value, int decimals);

// --- Run registry -------------------------------------------------------------

// All paths are registry-root-relative so identical pipelines produce
// identical registries wherever they land.
struct RegistryEntry {
  std::string run_id;
  std::string plan_id;
  std::string plan_digest;
  std::string plan_path;
  std::string manifest_path;
  std::map<std::string, std::string> predictions;  // split -> path
  std::map<std::string, std::string> reports;      // split -> metric report path
};

class RunRegistry {
 public:
  explicit RunRegistry(std::filesystem::path root);

  // Loads <root>/registry.json when present.
  static RunRegistry open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const std::map<std::string, RegistryEntry>& entries() const { return entries_; }
  const RegistryEntry* find(const std::string& run_id) const;

  // Registers (or replaces) an entry; every referenced file must exist under
  // the root. Mutations are lock-guarded within the process.
  void put(const RegistryEntry& entry);

  void save() const;  // writes <root>/registry.json

  // sha256 over the sorted (relative path, file sha256) listing of every file
  // under the root. Two registries with equal digests hold byte-identical
  // trees.
  std::string content_digest() const;

 private:
  void require_file(const std::string& relative) const;

  std::filesystem::path root_;
  std::map<std::string, RegistryEntry> entries_;
  // shared_ptr keeps the registry movable; copies guard the same root.
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
};

// --- Comparison tables -----------------------------------------------------------

// summary:      Rouge-L / BLEU / BERTScore at 3 decimals.
// competition:  BLEU-1, BLEU-2 at 1 decimal ([0,100]); ROUGE-1/2/L at 4
//               decimals; QA-F1 at 3 decimals.
enum class TableStyle { summary, competition };

TableStyle table_style_from_string(std::string_view s);

struct ComparisonTable {
  struct Row {
    std::string run_id;
    std::string split;
    std::vector<std::optional<double>> values;  // parallel to columns
  };
  TableStyle style = TableStyle::summary;
  std::vector<std::string> columns;
  std::vector<int> decimals;
  std::vector<Row> rows;
  std::vector<std::string> warnings;  // missing (run, split) reports

  // Markdown flags each column's maximum in bold; gap cells render "--".
  std::string to_markdown() const;
  std::string to_csv() const;
};

// Rows ordered by (run_id, split) lexicographically. A missing metric report
// produces a gap row plus a warning, never a silent omission.
ComparisonTable build_comparison(const RunRegistry& registry, const std::vector<std::string>& run_ids,
                                 const std::vector<std::string>& splits, TableStyle style);

// --- Statistics tables -------------------------------------------------------------

struct StatsRow {
  std::string split;
  SplitStatistics stats;
};

// One row per split, five statistics columns; a held-out answer length
// renders "--". Ratios and lengths are shown at 2 decimals.
std::string render_stats_markdown(const std::vector<StatsRow>& rows);
std::string render_stats_csv(const std::vector<StatsRow>& rows);

}  // namespace vatika
