#include "vatika/synthgen.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vatika/errors.hpp"
#include "vatika/metrics.hpp"
#include "vatika/parallel.hpp"
#include "vatika/rng.hpp"
#include "vatika/sha256.hpp"
#include "vatika/text.hpp"

// httplib is pulled in only here; keep it out of the public headers.
#include <httplib.h>

namespace vatika {

using nlohmann::json;

void GenerationConfig::validate() const {
  if (temperature < 0.0 || temperature > 2.0)
    throw ValidationError("temperature must be in [0, 2]");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ValidationError("top_p must be in (0, 1]");
  if (max_new_tokens < 1) throw ValidationError("max_new_tokens must be positive");
  if (num_fewshot < 0) throw ValidationError("num_fewshot must be non-negative");
  if (max_attempts < 1) throw ValidationError("max_attempts must be >= 1");
}

// --- Prompts -------------------------------------------------------------------

namespace {

std::string single_line(std::string_view s) {
  std::string out(trim(s));
  for (char& c : out)
    if (c == '\n' || c == '\r') c = ' ';
  return out;
}

int64_t wall_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

}  // namespace

std::string render_qa_blocks(const std::vector<std::pair<std::string, std::string>>& pairs) {
  std::string out;
  for (size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out += '\n';
    out += "Q: " + single_line(pairs[i].first) + '\n';
    out += "A: " + single_line(pairs[i].second) + '\n';
  }
  return out;
}

PromptBundle build_prompt(const ContextRecord& target, const std::vector<Exemplar>& exemplars,
                          const GenerationConfig& config) {
  config.validate();
  if (exemplars.size() != size_t(config.num_fewshot))
    throw ValidationError("expected " + std::to_string(config.num_fewshot) + " exemplars, got " +
                          std::to_string(exemplars.size()));

  PromptBundle bundle;
  bundle.system_preamble = config.instruction;
  bundle.fewshot_examples = exemplars;
  bundle.target_context = target.text;

  std::string rendered = bundle.system_preamble + "\n";
  for (const Exemplar& ex : exemplars) {
    if (ex.second.empty())
      throw ValidationError("exemplar context '" + ex.first.context_id + "' has no pairs");
    if (ex.first.text == target.text)
      throw ValidationError("exemplar context '" + ex.first.context_id +
                            "' duplicates the target context");
    std::vector<std::pair<std::string, std::string>> qa;
    qa.reserve(ex.second.size());
    for (const QAPair& p : ex.second) {
      if (!p.answer)
        throw ValidationError("exemplar pair '" + p.pair_id + "' has no answer");
      qa.emplace_back(p.question, *p.answer);
    }
    rendered += "\nContext: " + single_line(ex.first.text) + '\n';
    rendered += render_qa_blocks(qa);
  }
  rendered += "\nContext: " + single_line(target.text) + '\n';

  bundle.rendered = std::move(rendered);
  bundle.prompt_hash = sha256_hex(bundle.rendered);
  return bundle;
}

// --- Output parsing --------------------------------------------------------------

namespace {

// Matches "<marker><digits?>:" with optional surrounding spaces; returns the
// rest of the line.
std::optional<std::string> match_marker(std::string_view line, char marker) {
  size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size()) return std::nullopt;
  const char c = line[i];
  if (c != marker && c != char(std::tolower(marker))) return std::nullopt;
  ++i;
  while (i < line.size() && std::isdigit(uint8_t(line[i]))) ++i;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || line[i] != ':') return std::nullopt;
  return std::string(line.substr(i + 1));
}

}  // namespace

ParsedGeneration parse_generation_detailed(std::string_view raw) {
  ParsedGeneration result;
  std::optional<std::string> pending_question;

  auto close_pending = [&](const std::optional<std::string>& answer) {
    if (!pending_question) return;
    const std::string q = trim(*pending_question);
    const std::string a = answer ? trim(*answer) : std::string();
    if (!q.empty() && !a.empty())
      result.pairs.emplace_back(q, a);
    else
      ++result.rejected;
    pending_question.reset();
  };

  size_t start = 0;
  while (start <= raw.size()) {
    const size_t end = raw.find('\n', start);
    const std::string_view line =
        raw.substr(start, end == std::string_view::npos ? raw.size() - start : end - start);
    if (auto q = match_marker(line, 'Q')) {
      close_pending(std::nullopt);  // previous question never got an answer
      ++result.question_markers;
      pending_question = std::move(*q);
    } else if (auto a = match_marker(line, 'A')) {
      // A stray answer line (no open question) is commentary.
      if (pending_question) close_pending(a);
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  close_pending(std::nullopt);
  return result;
}

std::vector<std::pair<std::string, std::string>> parse_generation(std::string_view raw) {
  return parse_generation_detailed(raw).pairs;
}

// --- Mock backend -----------------------------------------------------------------

MockGenerationBackend::MockGenerationBackend(std::string id)
    : MockGenerationBackend(std::move(id), Behavior{}) {}

MockGenerationBackend::MockGenerationBackend(std::string id, Behavior behavior)
    : id_(std::move(id)), behavior_(std::move(behavior)) {}

BackendResponse MockGenerationBackend::complete(const BackendRequest& request) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    int& calls = attempts_[sha256_hex(request.prompt)];
    ++calls;
    if (behavior_.fail_attempts_per_prompt >= calls)
      throw BackendError("mock backend: simulated timeout (attempt " + std::to_string(calls) + ")");
  }
  if (!behavior_.fail_marker.empty() &&
      request.prompt.find(behavior_.fail_marker) != std::string::npos)
    throw BackendError("mock backend: simulated failure for marked prompt");

  // The target context is the last "Context:" section of the prompt.
  const std::string marker = "Context: ";
  const size_t pos = request.prompt.rfind(marker);
  const std::string context_text =
      pos == std::string::npos ? request.prompt : trim(request.prompt.substr(pos + marker.size()));

  if (behavior_.emit_prose)
    return {"यह संदर्भ पर्यटन के बारे में जानकारी देता है और इसमें कोई प्रश्न नहीं है।"};

  std::vector<std::string> words = whitespace_words(context_text);
  if (words.empty()) words.push_back("संदर्भ");
  const uint64_t salt = mix_seed(fnv1a64(context_text), request.seed.value_or(0));

  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(size_t(behavior_.pairs_per_context));
  for (int i = 0; i < behavior_.pairs_per_context; ++i) {
    const std::string& wq = words[size_t(mix_seed(salt, uint64_t(i) * 2) % words.size())];
    const std::string& wa = words[size_t(mix_seed(salt, uint64_t(i) * 2 + 1) % words.size())];
    pairs.emplace_back(wq + " के बारे में प्रश्न " + std::to_string(i + 1) + " क्या है?",
                       wa + " इसका उत्तर " + std::to_string(i + 1) + " है।");
  }
  std::string completion = render_qa_blocks(pairs);
  if (behavior_.truncate_final_block && !completion.empty()) {
    // Chop the final answer line off, leaving an orphaned question.
    const size_t cut = completion.rfind("\nA: ");
    if (cut != std::string::npos) completion.resize(cut + 1);
  }
  return {completion};
}

// --- HTTP backend -----------------------------------------------------------------

HttpGenerationBackend::HttpGenerationBackend(std::string id, std::string host, int port,
                                             std::string path, std::string api_key_env,
                                             int timeout_seconds)
    : id_(std::move(id)),
      host_(std::move(host)),
      port_(port),
      path_(std::move(path)),
      api_key_env_(std::move(api_key_env)),
      timeout_seconds_(timeout_seconds) {}

BackendResponse HttpGenerationBackend::complete(const BackendRequest& request) {
  httplib::Client client(host_, port_);
  client.set_connection_timeout(timeout_seconds_);
  client.set_read_timeout(timeout_seconds_);

  httplib::Headers headers;
  if (const char* key = std::getenv(api_key_env_.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  json body{{"prompt", request.prompt},
            {"temperature", request.temperature},
            {"top_p", request.top_p},
            {"max_new_tokens", request.max_new_tokens}};
  if (request.seed) body["seed"] = *request.seed;

  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res)
    throw BackendError("http backend '" + id_ + "': transport error (" +
                       httplib::to_string(res.error()) + ")");
  if (res->status != 200)
    throw BackendError("http backend '" + id_ + "': status " + std::to_string(res->status));
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::parse_error&) {
    throw BackendError("http backend '" + id_ + "': non-JSON response");
  }
  if (!reply.contains("completion") || !reply["completion"].is_string())
    throw BackendError("http backend '" + id_ + "': response missing 'completion'");
  return {reply["completion"].get<std::string>()};
}

// --- Generation records ----------------------------------------------------------

std::string_view to_string(GenStatus s) {
  switch (s) {
    case GenStatus::ok: return "ok";
    case GenStatus::parse_partial: return "parse_partial";
    default: return "parse_failed";
  }
}

GenStatus gen_status_from_string(std::string_view s) {
  if (s == "ok") return GenStatus::ok;
  if (s == "parse_partial") return GenStatus::parse_partial;
  if (s == "parse_failed") return GenStatus::parse_failed;
  throw ValidationError("unknown generation status '" + std::string(s) + "'");
}

GenerationRecord generate_for_context(const ContextRecord& target, const PromptBundle& bundle,
                                      const GenerationConfig& config, GenerationBackend& backend) {
  config.validate();

  GenerationRecord record;
  record.context_id = target.context_id;
  record.prompt_hash = bundle.prompt_hash;
  record.backend_id = backend.id();
  record.timestamp = config.seed ? 0 : wall_clock_ms();

  BackendRequest request{bundle.rendered, config.temperature, config.top_p, config.max_new_tokens,
                         config.seed};

  std::string completion;
  bool got_completion = false;
  std::string last_error;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    record.attempts = attempt;
    try {
      BackendResponse response = backend.complete(request);
      if (trim(response.completion).empty()) {
        last_error = "empty completion";
        continue;
      }
      completion = std::move(response.completion);
      got_completion = true;
      break;
    } catch (const BackendError& e) {
      last_error = e.what();
    }
  }

  if (!got_completion) {
    record.status = GenStatus::parse_failed;
    record.error = "backend failed after " + std::to_string(record.attempts) +
                   " attempt(s): " + last_error;
    return record;
  }

  record.raw_output = completion;  // stored verbatim
  const ParsedGeneration parsed = parse_generation_detailed(completion);
  int index = 0;
  for (const auto& [question, answer] : parsed.pairs) {
    QAPair pair;
    std::string suffix = std::to_string(++index);
    if (suffix.size() < 3) suffix.insert(0, 3 - suffix.size(), '0');
    pair.pair_id = target.context_id + "#" + backend.id() + "#" + suffix;
    pair.context_id = target.context_id;
    pair.question = nfc_normalize(question);
    pair.answer = nfc_normalize(answer);
    pair.provenance = Provenance::synthetic;
    pair.generator_id = backend.id();
    pair.generation_meta = GenerationMeta{config.temperature, config.top_p, bundle.prompt_hash};
    record.parsed_pairs.push_back(std::move(pair));
  }

  if (record.parsed_pairs.empty()) {
    record.status = GenStatus::parse_failed;
    record.error = "no parseable Q/A blocks in completion";
  } else if (!parsed.complete()) {
    record.status = GenStatus::parse_partial;
  } else {
    record.status = GenStatus::ok;
  }
  return record;
}

// --- Dedup ------------------------------------------------------------------------

namespace {

std::unordered_set<std::string> question_token_set(const QAPair& pair) {
  std::unordered_set<std::string> set;
  for (std::string& t : tokenize_hindi(pair.question).tokens) set.insert(std::move(t));
  return set;
}

double jaccard(const std::unordered_set<std::string>& a, const std::unordered_set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  size_t inter = 0;
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  for (const std::string& t : small)
    if (large.count(t)) ++inter;
  return double(inter) / double(a.size() + b.size() - inter);
}

}  // namespace

std::pair<std::vector<QAPair>, DedupReport> dedup_filter(const std::vector<QAPair>& pairs,
                                                         double threshold) {
  if (threshold < 0.0 || threshold > 1.0)
    throw ValidationError("dedup threshold must be in [0, 1]; use the enabled flag to disable");

  struct Kept {
    size_t pair_index;
    std::unordered_set<std::string> tokens;
  };
  std::unordered_map<std::string, std::vector<Kept>> kept_by_context;
  std::vector<QAPair> kept;
  DedupReport report;
  std::unordered_map<std::string, size_t> cluster_of_rep;

  for (const QAPair& pair : pairs) {
    auto tokens = question_token_set(pair);
    auto& kept_here = kept_by_context[pair.context_id];

    double best_sim = -1.0;
    const Kept* best = nullptr;
    for (const Kept& k : kept_here) {
      const double sim = jaccard(tokens, k.tokens);
      if (sim > best_sim) {
        best_sim = sim;
        best = &k;
      }
    }

    if (best != nullptr && best_sim >= threshold) {
      const std::string& rep_id = kept[best->pair_index].pair_id;
      auto [it, fresh] = cluster_of_rep.emplace(rep_id, report.clusters.size());
      if (fresh) report.clusters.push_back({rep_id, {}, 0.0});
      DedupReport::Cluster& cluster = report.clusters[it->second];
      cluster.duplicates.push_back(pair.pair_id);
      cluster.similarity = std::max(cluster.similarity, best_sim);
      ++report.dropped;
    } else {
      kept_here.push_back({kept.size(), std::move(tokens)});
      kept.push_back(pair);
      ++report.kept;
    }
  }
  return {std::move(kept), std::move(report)};
}

// --- Campaign ---------------------------------------------------------------------

std::vector<Exemplar> select_exemplars(const DatasetSplit& pool, int count,
                                       std::string_view exclude_context_id) {
  std::vector<const QAPair*> answered;
  for (const QAPair& p : pool.pairs())
    if (p.answer && p.context_id != exclude_context_id) answered.push_back(&p);
  std::sort(answered.begin(), answered.end(),
            [](const QAPair* a, const QAPair* b) { return a->pair_id < b->pair_id; });
  if (answered.size() < size_t(count))
    throw ValidationError("exemplar pool has only " + std::to_string(answered.size()) +
                          " usable pairs, need " + std::to_string(count));
  std::vector<Exemplar> exemplars;
  exemplars.reserve(size_t(count));
  for (int i = 0; i < count; ++i) {
    const QAPair& p = *answered[size_t(i)];
    const ContextRecord* ctx = pool.find_context(p.context_id);
    exemplars.emplace_back(*ctx, std::vector<QAPair>{p});
  }
  return exemplars;
}

namespace {

json record_to_json(const GenerationRecord& r) {
  json pairs = json::array();
  for (const QAPair& p : r.parsed_pairs) pairs.push_back(json::parse(qa_record_json(p)));
  json j{{"kind", "generation"},
         {"context_id", r.context_id},
         {"prompt_hash", r.prompt_hash},
         {"backend_id", r.backend_id},
         {"raw_output", r.raw_output},
         {"status", std::string(to_string(r.status))},
         {"attempts", r.attempts},
         {"timestamp", r.timestamp},
         {"parsed_pairs", std::move(pairs)}};
  if (r.error) j["error"] = *r.error;
  return j;
}

}  // namespace

CampaignResult run_generation_campaign(const DatasetSplit& split, const GenerationConfig& config,
                                       GenerationBackend& backend, const DatasetSplit& exemplar_pool,
                                       const CampaignOptions& options) {
  config.validate();

  const std::string name =
      options.split_name.empty() ? "synthetic-" + backend.id() : options.split_name;
  const size_t n = split.contexts().size();

  std::vector<GenerationRecord> records(n);
  parallel_for(n, options.workers, [&](size_t i) {
    const ContextRecord& target = split.contexts()[i];
    const std::vector<Exemplar> exemplars =
        select_exemplars(exemplar_pool, config.num_fewshot, target.context_id);
    const PromptBundle bundle = build_prompt(target, exemplars, config);
    records[i] = generate_for_context(target, bundle, config, backend);
  });

  CampaignResult result;
  std::vector<QAPair> pairs;
  for (size_t i = 0; i < n; ++i) {
    GenerationRecord& r = records[i];
    if (config.seed) r.timestamp = int64_t(i);  // logical clock: reproducible manifests
    if (r.status == GenStatus::parse_failed)
      result.failures.push_back({r.context_id, r.error.value_or("no pairs parsed")});
    for (const QAPair& p : r.parsed_pairs) pairs.push_back(p);
  }

  if (options.dedup_enabled) {
    auto [kept, report] = dedup_filter(pairs, options.dedup_threshold);
    pairs = std::move(kept);
    result.dedup = std::move(report);
  }

  result.synthetic = DatasetSplit(name, split.contexts(), std::move(pairs));

  for (const GenerationRecord& r : records) {
    result.manifest += record_to_json(r).dump();
    result.manifest += '\n';
  }
  result.manifest_digest = sha256_hex(result.manifest);
  result.records = std::move(records);

  if (options.manifest_path) {
    std::ofstream out(*options.manifest_path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write campaign manifest: " + options.manifest_path->string());
    out << result.manifest;
  }
  return result;
}

}  // namespace vatika
