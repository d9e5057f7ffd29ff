#include "vatika/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"
#include "vatika/sha256.hpp"

namespace vatika {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

// --- Run registry ----------------------------------------------------------------

RunRegistry::RunRegistry(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
}

RunRegistry RunRegistry::open(const fs::path& root) {
  RunRegistry registry(root);
  const fs::path file = root / "registry.json";
  if (!fs::exists(file)) return registry;

  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot open registry: " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("corrupt registry.json: ") + e.what());
  }
  for (const json& ej : j.value("runs", json::array())) {
    RegistryEntry e;
    e.run_id = ej.at("run_id").get<std::string>();
    e.plan_id = ej.value("plan_id", std::string());
    e.plan_digest = ej.value("plan_digest", std::string());
    e.plan_path = ej.value("plan_path", std::string());
    e.manifest_path = ej.value("manifest_path", std::string());
    const json preds = ej.value("predictions", json::object());
    for (const auto& [split, path] : preds.items()) e.predictions[split] = path.get<std::string>();
    const json reports = ej.value("reports", json::object());
    for (const auto& [split, path] : reports.items()) e.reports[split] = path.get<std::string>();
    registry.entries_[e.run_id] = std::move(e);
  }
  return registry;
}

const RegistryEntry* RunRegistry::find(const std::string& run_id) const {
  auto it = entries_.find(run_id);
  return it == entries_.end() ? nullptr : &it->second;
}

void RunRegistry::require_file(const std::string& relative) const {
  if (relative.empty()) return;
  if (!fs::exists(root_ / relative))
    throw ValidationError("registry entry references missing file: " + relative);
}

void RunRegistry::put(const RegistryEntry& entry) {
  std::lock_guard<std::mutex> lock(*mutex_);
  if (entry.run_id.empty()) throw ValidationError("registry entry needs a run_id");
  require_file(entry.plan_path);
  require_file(entry.manifest_path);
  for (const auto& [split, path] : entry.predictions) require_file(path);
  for (const auto& [split, path] : entry.reports) require_file(path);
  entries_[entry.run_id] = entry;
}

void RunRegistry::save() const {
  std::lock_guard<std::mutex> lock(*mutex_);
  json runs = json::array();
  for (const auto& [run_id, e] : entries_) {
    json ej{{"run_id", e.run_id},
            {"plan_id", e.plan_id},
            {"plan_digest", e.plan_digest},
            {"plan_path", e.plan_path},
            {"manifest_path", e.manifest_path},
            {"predictions", json(e.predictions)},
            {"reports", json(e.reports)}};
    runs.push_back(std::move(ej));
  }
  const fs::path file = root_ / "registry.json";
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write registry: " + file.string());
  out << json{{"runs", std::move(runs)}}.dump(2) << '\n';
}

std::string RunRegistry::content_digest() const {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), root_));
  }
  std::sort(files.begin(), files.end());

  Sha256 h;
  for (const fs::path& rel : files) {
    std::ifstream in(root_ / rel, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    h.update(rel.generic_string());
    h.update("\0", 1);
    h.update(sha256_hex(buf.str()));
    h.update("\n");
  }
  return h.hex_digest();
}

// --- Comparison tables ----------------------------------------------------------

TableStyle table_style_from_string(std::string_view s) {
  if (s == "summary") return TableStyle::summary;
  if (s == "competition") return TableStyle::competition;
  throw ValidationError("unknown table style '" + std::string(s) + "'");
}

namespace {

struct ColumnSpec {
  const char* header;
  const char* csv_key;
  int decimals;
  std::optional<double> (*get)(const MetricReport&);
};

const ColumnSpec kSummaryColumns[] = {
    {"Rouge-L", "rouge_l", 3, [](const MetricReport& r) { return r.rougeL_f; }},
    {"BLEU", "bleu", 3, [](const MetricReport& r) { return r.bleu; }},
    {"BERTScore", "bertscore", 3, [](const MetricReport& r) { return r.bertscore_f; }},
};

const ColumnSpec kCompetitionColumns[] = {
    {"BLEU-1", "bleu1", 1, [](const MetricReport& r) { return r.bleu1; }},
    {"BLEU-2", "bleu2", 1, [](const MetricReport& r) { return r.bleu2; }},
    {"ROUGE-1", "rouge1", 4, [](const MetricReport& r) { return r.rouge1_f; }},
    {"ROUGE-2", "rouge2", 4, [](const MetricReport& r) { return r.rouge2_f; }},
    {"ROUGE-L", "rouge_l", 4, [](const MetricReport& r) { return r.rougeL_f; }},
    {"QA-F1", "qa_f1", 3, [](const MetricReport& r) { return r.qa_f1; }},
};

std::pair<const ColumnSpec*, size_t> columns_for(TableStyle style) {
  if (style == TableStyle::summary) return {kSummaryColumns, std::size(kSummaryColumns)};
  return {kCompetitionColumns, std::size(kCompetitionColumns)};
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

ComparisonTable build_comparison(const RunRegistry& registry, const std::vector<std::string>& run_ids,
                                 const std::vector<std::string>& splits, TableStyle style) {
  ComparisonTable table;
  table.style = style;
  const auto [specs, count] = columns_for(style);
  for (size_t c = 0; c < count; ++c) {
    table.columns.push_back(specs[c].header);
    table.decimals.push_back(specs[c].decimals);
  }

  std::vector<std::string> runs = run_ids;
  std::vector<std::string> split_names = splits;
  std::sort(runs.begin(), runs.end());
  std::sort(split_names.begin(), split_names.end());

  for (const std::string& run_id : runs) {
    const RegistryEntry* entry = registry.find(run_id);
    if (entry == nullptr) {
      table.warnings.push_back("run '" + run_id + "' is not in the registry");
      for (const std::string& split : split_names)
        table.rows.push_back({run_id, split,
                              std::vector<std::optional<double>>(count, std::nullopt)});
      continue;
    }
    for (const std::string& split : split_names) {
      ComparisonTable::Row row{run_id, split, {}};
      auto it = entry->reports.find(split);
      if (it == entry->reports.end()) {
        table.warnings.push_back("no metric report for run '" + run_id + "' on split '" + split +
                                 "'");
        row.values.assign(count, std::nullopt);
      } else {
        const MetricReport report = MetricReport::load(registry.root() / it->second);
        for (size_t c = 0; c < count; ++c) row.values.push_back(specs[c].get(report));
      }
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

std::string ComparisonTable::to_markdown() const {
  // Column maxima get the bold flag; comparison is on raw values.
  std::vector<std::optional<double>> maxima(columns.size());
  for (const Row& row : rows) {
    for (size_t c = 0; c < columns.size(); ++c) {
      if (row.values[c] && (!maxima[c] || *row.values[c] > *maxima[c])) maxima[c] = row.values[c];
    }
  }

  std::string out = "| Run | Split |";
  for (const std::string& col : columns) out += " " + col + " |";
  out += "\n|---|---|";
  for (size_t c = 0; c < columns.size(); ++c) out += "---|";
  out += "\n";
  for (const Row& row : rows) {
    out += "| " + row.run_id + " | " + row.split + " |";
    for (size_t c = 0; c < columns.size(); ++c) {
      if (!row.values[c]) {
        out += " -- |";
      } else {
        const std::string cell = format_fixed(*row.values[c], decimals[c]);
        const bool best = maxima[c] && *row.values[c] == *maxima[c];
        out += best ? " **" + cell + "** |" : " " + cell + " |";
      }
    }
    out += "\n";
  }
  return out;
}

std::string ComparisonTable::to_csv() const {
  const auto [specs, count] = columns_for(style);
  std::string out = "run,split";
  for (size_t c = 0; c < count; ++c) out += std::string(",") + specs[c].csv_key;
  out += "\n";
  for (const Row& row : rows) {
    out += csv_escape(row.run_id) + "," + csv_escape(row.split);
    for (size_t c = 0; c < count; ++c)
      out += "," + (row.values[c] ? format_fixed(*row.values[c], decimals[c]) : std::string("--"));
    out += "\n";
  }
  return out;
}

// --- Statistics tables -------------------------------------------------------------

std::string render_stats_markdown(const std::vector<StatsRow>& rows) {
  std::string out =
      "| Split | Contexts | QA Pairs | QA/Context | Ques. length | Ans. length |\n"
      "|---|---|---|---|---|---|\n";
  for (const StatsRow& r : rows) {
    out += "| " + r.split + " | " + std::to_string(r.stats.context_count) + " | " +
           std::to_string(r.stats.qa_count) + " | " + format_fixed(r.stats.qa_per_context, 2) +
           " | " + format_fixed(r.stats.mean_question_len, 2) + " | " +
           (r.stats.mean_answer_len ? format_fixed(*r.stats.mean_answer_len, 2) : std::string("--")) +
           " |\n";
  }
  return out;
}

std::string render_stats_csv(const std::vector<StatsRow>& rows) {
  std::string out = "split,contexts,qa_pairs,qa_per_context,question_length,answer_length\n";
  for (const StatsRow& r : rows) {
    out += csv_escape(r.split) + "," + std::to_string(r.stats.context_count) + "," +
           std::to_string(r.stats.qa_count) + "," + format_fixed(r.stats.qa_per_context, 2) + "," +
           format_fixed(r.stats.mean_question_len, 2) + "," +
           (r.stats.mean_answer_len ? format_fixed(*r.stats.mean_answer_len, 2) : std::string("--")) +
           "\n";
  }
  return out;
}

}  // namespace vatika
