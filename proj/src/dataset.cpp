#include "vatika/dataset.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"
#include "vatika/sha256.hpp"
#include "vatika/text.hpp"

namespace vatika {

using nlohmann::json;

std::string_view to_string(Provenance p) {
  return p == Provenance::original ? "original" : "synthetic";
}

Provenance provenance_from_string(std::string_view s) {
  if (s == "original") return Provenance::original;
  if (s == "synthetic") return Provenance::synthetic;
  throw ValidationError("unknown provenance '" + std::string(s) + "'");
}

DatasetSplit::DatasetSplit(std::string name, std::vector<ContextRecord> contexts,
                           std::vector<QAPair> pairs)
    : name_(std::move(name)), contexts_(std::move(contexts)), pairs_(std::move(pairs)) {
  context_index_.reserve(contexts_.size());
  for (size_t i = 0; i < contexts_.size(); ++i) {
    ContextRecord& c = contexts_[i];
    c.split_name = name_;
    if (trim(c.text).empty())
      throw ValidationError("context '" + c.context_id + "' has empty text");
    if (!context_index_.emplace(c.context_id, i).second)
      throw ValidationError("duplicate context_id '" + c.context_id + "' in split '" + name_ + "'");
  }
  pair_index_.reserve(pairs_.size());
  for (size_t i = 0; i < pairs_.size(); ++i) {
    const QAPair& p = pairs_[i];
    if (trim(p.question).empty())
      throw ValidationError("pair '" + p.pair_id + "' has empty question");
    if (p.provenance == Provenance::synthetic && !p.generator_id)
      throw ValidationError("synthetic pair '" + p.pair_id + "' missing generator_id");
    if (!context_index_.count(p.context_id))
      throw ValidationError("pair '" + p.pair_id + "' references unknown context_id '" +
                            p.context_id + "'");
    if (!pair_index_.emplace(p.pair_id, i).second)
      throw ValidationError("duplicate pair_id '" + p.pair_id + "' in split '" + name_ + "'");
  }
}

const ContextRecord* DatasetSplit::find_context(std::string_view context_id) const {
  auto it = context_index_.find(std::string(context_id));
  return it == context_index_.end() ? nullptr : &contexts_[it->second];
}

const QAPair* DatasetSplit::find_pair(std::string_view pair_id) const {
  auto it = pair_index_.find(std::string(pair_id));
  return it == pair_index_.end() ? nullptr : &pairs_[it->second];
}

bool DatasetSplit::all_answers_present() const {
  for (const QAPair& p : pairs_)
    if (!p.answer) return false;
  return true;
}

namespace {

std::string require_string(const json& j, const char* field, long line) {
  auto it = j.find(field);
  if (it == j.end()) throw SchemaError("missing required field", line, field);
  if (!it->is_string()) throw SchemaError("expected a string", line, field);
  return it->get<std::string>();
}

}  // namespace

DatasetSplit parse_dataset(std::string_view jsonl, const std::string& split_name) {
  std::vector<ContextRecord> contexts;
  std::vector<QAPair> pairs;
  std::unordered_map<std::string, long> context_lines;
  std::unordered_map<std::string, long> pair_lines;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!j.is_object()) throw SchemaError("expected a JSON object", line_no);
    const std::string kind = require_string(j, "kind", line_no);
    if (kind == "context") {
      ContextRecord c;
      c.context_id = require_string(j, "context_id", line_no);
      c.text = nfc_normalize(require_string(j, "text", line_no));
      c.split_name = split_name;
      if (trim(c.text).empty()) throw SchemaError("context text is empty", line_no, "text");
      if (!context_lines.emplace(c.context_id, line_no).second)
        throw SchemaError("duplicate context_id '" + c.context_id + "'", line_no, "context_id");
      contexts.push_back(std::move(c));
    } else if (kind == "qa") {
      QAPair p;
      p.pair_id = require_string(j, "pair_id", line_no);
      p.context_id = require_string(j, "context_id", line_no);
      p.question = nfc_normalize(require_string(j, "question", line_no));
      auto ans = j.find("answer");
      if (ans == j.end()) throw SchemaError("missing required field", line_no, "answer");
      if (ans->is_null()) {
        p.answer = std::nullopt;
      } else if (ans->is_string()) {
        p.answer = nfc_normalize(ans->get<std::string>());
      } else {
        throw SchemaError("expected a string or null", line_no, "answer");
      }
      p.provenance = provenance_from_string(require_string(j, "provenance", line_no));
      auto gen = j.find("generator_id");
      if (gen != j.end() && !gen->is_null()) {
        if (!gen->is_string()) throw SchemaError("expected a string or null", line_no, "generator_id");
        p.generator_id = gen->get<std::string>();
      }
      if (p.provenance == Provenance::synthetic && !p.generator_id)
        throw SchemaError("synthetic pair missing generator_id", line_no, "generator_id");
      auto meta = j.find("generation_meta");
      if (meta != j.end() && !meta->is_null()) {
        if (!meta->is_object()) throw SchemaError("expected an object", line_no, "generation_meta");
        GenerationMeta m;
        m.temperature = meta->value("temperature", 0.0);
        m.top_p = meta->value("top_p", 0.0);
        m.prompt_hash = meta->value("prompt_hash", std::string());
        p.generation_meta = std::move(m);
      }
      if (trim(p.question).empty()) throw SchemaError("question is empty", line_no, "question");
      if (!pair_lines.emplace(p.pair_id, line_no).second)
        throw SchemaError("duplicate pair_id '" + p.pair_id + "'", line_no, "pair_id");
      pairs.push_back(std::move(p));
    } else {
      throw SchemaError("unknown record kind '" + kind + "'", line_no, "kind");
    }
  }

  // Context references may point forward, so dangling refs are a whole-file
  // check; the recorded line numbers keep the report precise.
  for (const QAPair& p : pairs) {
    if (!context_lines.count(p.context_id))
      throw SchemaError("pair '" + p.pair_id + "' references unknown context_id '" + p.context_id +
                            "'",
                        pair_lines.at(p.pair_id), "context_id");
  }

  try {
    return DatasetSplit(split_name, std::move(contexts), std::move(pairs));
  } catch (const ValidationError& e) {
    throw SchemaError(e.what(), line_no);
  }
}

DatasetSplit ingest_dataset(const std::filesystem::path& path, const std::string& split_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_dataset(buf.str(), split_name);
  } catch (const SchemaError& e) {
    throw e.with_file(path.string());
  }
}

std::string context_record_json(const ContextRecord& c) {
  json j{{"kind", "context"}, {"context_id", c.context_id}, {"text", c.text}};
  return j.dump();
}

std::string qa_record_json(const QAPair& p) {
  json j{{"kind", "qa"},
         {"pair_id", p.pair_id},
         {"context_id", p.context_id},
         {"question", p.question},
         {"answer", p.answer ? json(*p.answer) : json(nullptr)},
         {"provenance", std::string(to_string(p.provenance))},
         {"generator_id", p.generator_id ? json(*p.generator_id) : json(nullptr)}};
  if (p.generation_meta) {
    j["generation_meta"] = {{"temperature", p.generation_meta->temperature},
                            {"top_p", p.generation_meta->top_p},
                            {"prompt_hash", p.generation_meta->prompt_hash}};
  }
  return j.dump();
}

std::string serialize_dataset(const DatasetSplit& split) {
  std::string out;
  for (const ContextRecord& c : split.contexts()) {
    out += context_record_json(c);
    out += '\n';
  }
  for (const QAPair& p : split.pairs()) {
    out += qa_record_json(p);
    out += '\n';
  }
  return out;
}

void write_dataset(const DatasetSplit& split, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write dataset file: " + path.string());
  out << serialize_dataset(split);
}

std::string dataset_digest(const DatasetSplit& split) {
  return sha256_hex(serialize_dataset(split));
}

SplitStatistics compute_statistics(const DatasetSplit& split, const WordSplitter& splitter) {
  if (split.contexts().empty())
    throw DegenerateInputError("split '" + split.name() + "' has no contexts");

  SplitStatistics stats;
  stats.context_count = split.contexts().size();
  stats.qa_count = split.pairs().size();
  stats.qa_per_context = double(stats.qa_count) / double(stats.context_count);

  size_t question_words = 0;
  size_t answer_words = 0;
  size_t answered = 0;
  bool all_answers = true;
  for (const QAPair& p : split.pairs()) {
    question_words += splitter(p.question).size();
    if (p.answer) {
      answer_words += splitter(*p.answer).size();
      ++answered;
    } else {
      all_answers = false;
    }
  }
  stats.mean_question_len =
      stats.qa_count == 0 ? 0.0 : double(question_words) / double(stats.qa_count);
  if (all_answers)
    stats.mean_answer_len = answered == 0 ? 0.0 : double(answer_words) / double(answered);
  return stats;
}

SplitStatistics compute_statistics(const DatasetSplit& split) {
  return compute_statistics(split, [](std::string_view s) { return whitespace_words(s); });
}

DatasetSplit merge_splits(const std::vector<DatasetSplit>& splits, const std::string& name) {
  std::vector<ContextRecord> contexts;
  std::unordered_map<std::string, size_t> context_by_id;
  std::vector<QAPair> pairs;
  std::unordered_map<std::string, std::string> pair_source;  // final id -> source split

  for (const DatasetSplit& s : splits) {
    for (const ContextRecord& c : s.contexts()) {
      auto it = context_by_id.find(c.context_id);
      if (it == context_by_id.end()) {
        context_by_id.emplace(c.context_id, contexts.size());
        contexts.push_back(c);
      } else if (contexts[it->second].text != c.text) {
        throw ValidationError("conflicting texts for context_id '" + c.context_id +
                              "' while merging into '" + name + "'");
      }
    }
    for (const QAPair& p : s.pairs()) {
      QAPair q = p;
      auto it = pair_source.find(q.pair_id);
      if (it != pair_source.end()) {
        if (it->second == s.name())
          throw ValidationError("pair_id '" + p.pair_id + "' appears twice under source split '" +
                                s.name() + "' while merging into '" + name + "'");
        q.pair_id = s.name() + "/" + q.pair_id;
        if (pair_source.count(q.pair_id))
          throw ValidationError("pair_id '" + p.pair_id + "' collides across splits '" +
                                it->second + "' and '" + s.name() + "' even after namespacing");
      }
      pair_source.emplace(q.pair_id, s.name());
      pairs.push_back(std::move(q));
    }
  }
  return DatasetSplit(name, std::move(contexts), std::move(pairs));
}

}  // namespace vatika
