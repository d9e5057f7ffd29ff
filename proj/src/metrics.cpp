#include "vatika/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "vatika/dataset.hpp"
#include "vatika/errors.hpp"
#include "vatika/parallel.hpp"
#include "vatika/rng.hpp"
#include "vatika/text.hpp"

namespace vatika {

using nlohmann::json;

// --- Tokenization ----------------------------------------------------------

TokenSequence tokenize_hindi(std::string_view text) {
  TokenSequence seq;
  seq.source_text = std::string(text);

  const std::string normalized = nfc_normalize(text);
  std::vector<uint32_t> current;
  auto flush = [&] {
    if (!current.empty()) {
      std::string tok = utf8_encode(current);
      seq.tokens.push_back(std::move(tok));
      current.clear();
    }
  };
  for (uint32_t cp : utf8_decode(normalized)) {
    if (is_unicode_whitespace(cp)) {
      flush();
    } else if (cp == kDanda || cp == kDoubleDanda || is_ascii_punct(cp)) {
      // Punctuation becomes a standalone token and is then discarded.
      flush();
    } else {
      if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';  // Latin-only lowercasing
      current.push_back(cp);
    }
  }
  flush();
  return seq;
}

TokenSequence tokenize_naive(std::string_view text) {
  TokenSequence seq;
  seq.source_text = std::string(text);
  seq.tokens = whitespace_words(text);
  return seq;
}

// --- ROUGE -------------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts count_ngrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts counts;
  if (n <= 0 || tokens.size() < size_t(n)) return counts;
  for (size_t i = 0; i + n <= tokens.size(); ++i) {
    counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1;
  }
  return counts;
}

long clipped_overlap(const NgramCounts& pred, const NgramCounts& ref) {
  long overlap = 0;
  for (const auto& [gram, count] : pred) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

PrfScore prf_from_counts(long overlap, long pred_total, long ref_total) {
  PrfScore s;
  if (pred_total <= 0 || ref_total <= 0) return s;
  s.precision = double(overlap) / double(pred_total);
  s.recall = double(overlap) / double(ref_total);
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace

PrfScore rouge_n(const TokenSequence& pred, const TokenSequence& ref, int n) {
  if (n < 1) throw ValidationError("rouge_n requires n >= 1");
  const NgramCounts pred_counts = count_ngrams(pred.tokens, n);
  const NgramCounts ref_counts = count_ngrams(ref.tokens, n);
  const long pred_total = long(pred.tokens.size()) - n + 1;
  const long ref_total = long(ref.tokens.size()) - n + 1;
  return prf_from_counts(clipped_overlap(pred_counts, ref_counts), pred_total, ref_total);
}

size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j) {
      cur[j] = (a[i - 1] == b[j - 1]) ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

PrfScore rouge_l(const TokenSequence& pred, const TokenSequence& ref) {
  PrfScore s;
  if (pred.tokens.empty() || ref.tokens.empty()) return s;
  const double lcs = double(lcs_length(pred.tokens, ref.tokens));
  s.precision = lcs / double(pred.tokens.size());
  s.recall = lcs / double(ref.tokens.size());
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// --- BLEU --------------------------------------------------------------------

double bleu_corpus(const std::vector<TokenSequence>& preds, const std::vector<TokenSequence>& refs,
                   const BleuOptions& options) {
  if (preds.size() != refs.size())
    throw ValidationError("bleu: prediction/reference count mismatch (" +
                          std::to_string(preds.size()) + " vs " + std::to_string(refs.size()) + ")");
  if (preds.empty()) throw ValidationError("bleu: empty corpus");
  if (options.max_n < 1) throw ValidationError("bleu: max_n must be >= 1");

  const int max_n = options.max_n;
  std::vector<long> matches(max_n + 1, 0), candidates(max_n + 1, 0);
  long total_pred = 0, total_ref = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i].tokens;
    const auto& r = refs[i].tokens;
    total_pred += long(p.size());
    total_ref += long(r.size());
    for (int n = 1; n <= max_n; ++n) {
      const long cand = long(p.size()) - n + 1;
      if (cand > 0) candidates[n] += cand;
      matches[n] += clipped_overlap(count_ngrams(p, n), count_ngrams(r, n));
    }
  }

  if (total_pred == 0) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    if (candidates[n] == 0) return 0.0;
    double m = double(matches[n]);
    if (m == 0.0) {
      if (options.smoothing == BleuSmoothing::epsilon)
        m = options.epsilon;
      else
        return 0.0;
    }
    log_sum += std::log(m / double(candidates[n]));
  }
  const double geo_mean = std::exp(log_sum / double(max_n));
  const double length_penalty = std::exp(1.0 - double(total_ref) / double(total_pred));
  return geo_mean * length_penalty;
}

// --- QA-F1 ---------------------------------------------------------------------

double qa_f1_tokens(const TokenSequence& pred, const TokenSequence& ref) {
  if (pred.tokens.empty() && ref.tokens.empty()) return 1.0;
  if (pred.tokens.empty() || ref.tokens.empty()) return 0.0;
  std::unordered_map<std::string, long> ref_counts;
  for (const std::string& t : ref.tokens) ref_counts[t] += 1;
  long overlap = 0;
  for (const std::string& t : pred.tokens) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  return 2.0 * double(overlap) / double(pred.tokens.size() + ref.tokens.size());
}

double qa_f1(std::string_view pred, const std::vector<std::string>& refs, Tokenizer tokenizer) {
  if (refs.empty()) throw ValidationError("qa_f1: reference list is empty");
  const TokenSequence pred_seq = tokenizer(pred);
  double best = 0.0;
  for (const std::string& ref : refs) best = std::max(best, qa_f1_tokens(pred_seq, tokenizer(ref)));
  return best;
}

// --- BERTScore ------------------------------------------------------------------

HashEmbedder::HashEmbedder(int dimension, uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension < 1) throw ValidationError("embedder dimension must be positive");
}

std::vector<double> HashEmbedder::embed(const std::string& token) {
  std::mt19937_64 rng(mix_seed(fnv1a64(token), seed_));
  std::vector<double> v(static_cast<size_t>(dimension_), 0.0);
  double norm_sq = 0.0;
  for (double& x : v) {
    // Uniform in [-1, 1); pinned (no std distributions) so vectors reproduce
    // across platforms.
    x = double(rng()) / double(UINT64_MAX) * 2.0 - 1.0;
    norm_sq += x * x;
  }
  double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) {
    v[0] = 1.0;
    norm = 1.0;
  }
  for (double& x : v) x /= norm;
  return v;
}

OrthogonalEmbedder::OrthogonalEmbedder(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw ValidationError("embedder capacity must be positive");
}

std::vector<double> OrthogonalEmbedder::embed(const std::string& token) {
  size_t index = interned_.size();
  for (size_t i = 0; i < interned_.size(); ++i) {
    if (interned_[i] == token) {
      index = i;
      break;
    }
  }
  if (index == interned_.size()) {
    if (interned_.size() >= size_t(capacity_))
      throw ValidationError("orthogonal embedder capacity exhausted");
    interned_.push_back(token);
  }
  std::vector<double> v(size_t(capacity_), 0.0);
  v[index] = 1.0;
  return v;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<std::vector<double>> embed_all(const std::vector<std::string>& tokens,
                                           TokenEmbedder& embedder) {
  std::vector<std::vector<double>> out;
  out.reserve(tokens.size());
  for (const std::string& t : tokens) {
    std::vector<double> v = embedder.embed(t);
    if (v.size() != size_t(embedder.dimension()))
      throw BackendError("embedder returned a vector of wrong dimension");
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

BertScore bert_score_pair(const TokenSequence& pred, const TokenSequence& ref,
                          TokenEmbedder& embedder) {
  BertScore s;
  if (pred.tokens.empty() && ref.tokens.empty()) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  if (pred.tokens.empty() || ref.tokens.empty()) return s;

  const auto pred_vecs = embed_all(pred.tokens, embedder);
  const auto ref_vecs = embed_all(ref.tokens, embedder);

  double precision_sum = 0.0;
  for (const auto& pv : pred_vecs) {
    double best = -1.0;
    for (const auto& rv : ref_vecs) best = std::max(best, cosine(pv, rv));
    precision_sum += best;
  }
  double recall_sum = 0.0;
  for (const auto& rv : ref_vecs) {
    double best = -1.0;
    for (const auto& pv : pred_vecs) best = std::max(best, cosine(rv, pv));
    recall_sum += best;
  }
  // Clamped to [0,1]: random-vector embedders can yield slightly negative
  // greedy matches, and every metric in the suite is range-bounded.
  s.precision = std::clamp(precision_sum / double(pred_vecs.size()), 0.0, 1.0);
  s.recall = std::clamp(recall_sum / double(ref_vecs.size()), 0.0, 1.0);
  if (s.precision + s.recall > 0.0)
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

BertScore bert_score(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                     TokenEmbedder& embedder, Tokenizer tokenizer) {
  if (preds.size() != refs.size())
    throw ValidationError("bert_score: prediction/reference count mismatch");
  if (preds.empty()) throw ValidationError("bert_score: empty corpus");
  BertScore total;
  for (size_t i = 0; i < preds.size(); ++i) {
    const BertScore s = bert_score_pair(tokenizer(preds[i]), tokenizer(refs[i]), embedder);
    total.precision += s.precision;
    total.recall += s.recall;
    total.f1 += s.f1;
  }
  total.precision /= double(preds.size());
  total.recall /= double(preds.size());
  total.f1 /= double(preds.size());
  return total;
}

// --- Corpus evaluation -----------------------------------------------------------

namespace {

void set_json(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

std::optional<double> get_json(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

std::string dump_double(double v) { return json(v).dump(); }

}  // namespace

std::string MetricReport::to_json() const {
  json j = json::object();
  set_json(j, "rouge1_f", rouge1_f);
  set_json(j, "rouge2_f", rouge2_f);
  set_json(j, "rougeL_f", rougeL_f);
  set_json(j, "bleu", bleu);
  set_json(j, "bleu1", bleu1);
  set_json(j, "bleu2", bleu2);
  set_json(j, "qa_f1", qa_f1);
  set_json(j, "bertscore_f", bertscore_f);
  j["bleu_max_n"] = bleu_max_n;
  if (!per_example.empty()) {
    json rows = json::array();
    for (const PerExampleScore& e : per_example) {
      json r{{"pair_id", e.pair_id}};
      set_json(r, "rouge1_f", e.rouge1_f);
      set_json(r, "rouge2_f", e.rouge2_f);
      set_json(r, "rougeL_f", e.rougeL_f);
      set_json(r, "qa_f1", e.qa_f1);
      set_json(r, "bertscore_f", e.bertscore_f);
      rows.push_back(std::move(r));
    }
    j["per_example"] = std::move(rows);
  }
  return j.dump(2) + "\n";
}

MetricReport MetricReport::from_json(std::string_view text) {
  json j = json::parse(text);
  MetricReport r;
  r.rouge1_f = get_json(j, "rouge1_f");
  r.rouge2_f = get_json(j, "rouge2_f");
  r.rougeL_f = get_json(j, "rougeL_f");
  r.bleu = get_json(j, "bleu");
  r.bleu1 = get_json(j, "bleu1");
  r.bleu2 = get_json(j, "bleu2");
  r.qa_f1 = get_json(j, "qa_f1");
  r.bertscore_f = get_json(j, "bertscore_f");
  r.bleu_max_n = j.value("bleu_max_n", 4);
  if (j.contains("per_example")) {
    for (const json& e : j["per_example"]) {
      PerExampleScore s;
      s.pair_id = e.value("pair_id", std::string());
      s.rouge1_f = get_json(e, "rouge1_f");
      s.rouge2_f = get_json(e, "rouge2_f");
      s.rougeL_f = get_json(e, "rougeL_f");
      s.qa_f1 = get_json(e, "qa_f1");
      s.bertscore_f = get_json(e, "bertscore_f");
      r.per_example.push_back(std::move(s));
    }
  }
  return r;
}

void MetricReport::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write metric report: " + path.string());
  out << to_json();
}

MetricReport MetricReport::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open metric report: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

namespace {

std::string csv_cell(const std::optional<double>& v) { return v ? dump_double(*v) : ""; }

}  // namespace

std::string MetricReport::per_example_csv() const {
  std::string out = "pair_id,rouge1_f,rouge2_f,rougeL_f,qa_f1,bertscore_f\n";
  for (const PerExampleScore& e : per_example) {
    out += e.pair_id;
    out += ',' + csv_cell(e.rouge1_f);
    out += ',' + csv_cell(e.rouge2_f);
    out += ',' + csv_cell(e.rougeL_f);
    out += ',' + csv_cell(e.qa_f1);
    out += ',' + csv_cell(e.bertscore_f);
    out += '\n';
  }
  return out;
}

std::string MetricReport::per_example_jsonl() const {
  std::string out;
  for (const PerExampleScore& e : per_example) {
    json r{{"pair_id", e.pair_id}};
    set_json(r, "rouge1_f", e.rouge1_f);
    set_json(r, "rouge2_f", e.rouge2_f);
    set_json(r, "rougeL_f", e.rougeL_f);
    set_json(r, "qa_f1", e.qa_f1);
    set_json(r, "bertscore_f", e.bertscore_f);
    out += r.dump();
    out += '\n';
  }
  return out;
}

MetricReport evaluate_split(const std::vector<PredictionRow>& predictions,
                            const DatasetSplit& gold, const MetricSelection& selection,
                            TokenEmbedder* embedder) {
  if (selection.bertscore && embedder == nullptr)
    throw ValidationError("bertscore selected but no embedder supplied");

  // Exhaustive id reconciliation: report every missing/extra/duplicate id.
  std::unordered_map<std::string, const PredictionRow*> by_id;
  std::vector<std::string> duplicates, extra, missing;
  for (const PredictionRow& r : predictions) {
    if (!by_id.emplace(r.pair_id, &r).second) duplicates.push_back(r.pair_id);
    if (gold.find_pair(r.pair_id) == nullptr) extra.push_back(r.pair_id);
  }
  for (const QAPair& p : gold.pairs())
    if (!by_id.count(p.pair_id)) missing.push_back(p.pair_id);
  if (!duplicates.empty() || !extra.empty() || !missing.empty()) {
    std::string msg = "prediction/gold id mismatch:";
    auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (size_t i = 0; i < v.size(); ++i) s += (i ? ", " : " ") + v[i];
      return s;
    };
    if (!missing.empty()) msg += " missing predictions for:" + join(missing) + ";";
    if (!extra.empty()) msg += " predictions for unknown ids:" + join(extra) + ";";
    if (!duplicates.empty()) msg += " duplicated prediction ids:" + join(duplicates) + ";";
    throw ValidationError(msg);
  }

  for (const QAPair& p : gold.pairs())
    if (!p.answer)
      throw ValidationError("gold split '" + gold.name() +
                            "' has held-out (null) answers; it cannot be scored. Pair '" +
                            p.pair_id + "' has no gold answer.");

  const size_t n = gold.pairs().size();
  const Tokenizer tokenizer = selection.naive_whitespace ? &tokenize_naive : &tokenize_hindi;

  struct ExampleSlot {
    TokenSequence pred;
    TokenSequence ref;
    PerExampleScore score;
  };
  std::vector<ExampleSlot> slots(n);

  parallel_for(n, selection.workers, [&](size_t i) {
    const QAPair& gold_pair = gold.pairs()[i];
    ExampleSlot& slot = slots[i];
    slot.pred = tokenizer(by_id.at(gold_pair.pair_id)->prediction);
    slot.ref = tokenizer(*gold_pair.answer);
    slot.score.pair_id = gold_pair.pair_id;
    if (selection.rouge1) slot.score.rouge1_f = rouge_n(slot.pred, slot.ref, 1).f1;
    if (selection.rouge2) slot.score.rouge2_f = rouge_n(slot.pred, slot.ref, 2).f1;
    if (selection.rougeL) slot.score.rougeL_f = rouge_l(slot.pred, slot.ref).f1;
    if (selection.qa_f1) slot.score.qa_f1 = qa_f1_tokens(slot.pred, slot.ref);
  });

  // BERTScore runs serially: mock embedders may be stateful (interning).
  if (selection.bertscore) {
    for (ExampleSlot& slot : slots)
      slot.score.bertscore_f = bert_score_pair(slot.pred, slot.ref, *embedder).f1;
  }

  MetricReport report;
  report.bleu_max_n = selection.bleu_max_n;

  auto mean_of = [&](auto getter) {
    double sum = 0.0;
    for (const ExampleSlot& s : slots) sum += *getter(s.score);
    return n == 0 ? 0.0 : sum / double(n);
  };
  if (n > 0) {
    if (selection.rouge1) report.rouge1_f = mean_of([](const PerExampleScore& s) { return s.rouge1_f; });
    if (selection.rouge2) report.rouge2_f = mean_of([](const PerExampleScore& s) { return s.rouge2_f; });
    if (selection.rougeL) report.rougeL_f = mean_of([](const PerExampleScore& s) { return s.rougeL_f; });
    if (selection.qa_f1) report.qa_f1 = mean_of([](const PerExampleScore& s) { return s.qa_f1; });
    if (selection.bertscore)
      report.bertscore_f = mean_of([](const PerExampleScore& s) { return s.bertscore_f; });

    std::vector<TokenSequence> preds, refs;
    preds.reserve(n);
    refs.reserve(n);
    for (ExampleSlot& s : slots) {
      preds.push_back(std::move(s.pred));
      refs.push_back(std::move(s.ref));
    }
    BleuOptions bleu_opts;
    bleu_opts.smoothing = selection.smoothing;
    if (selection.bleu) {
      bleu_opts.max_n = selection.bleu_max_n;
      report.bleu = bleu_corpus(preds, refs, bleu_opts);
    }
    if (selection.bleu1) {
      bleu_opts.max_n = 1;
      report.bleu1 = 100.0 * bleu_corpus(preds, refs, bleu_opts);
    }
    if (selection.bleu2) {
      bleu_opts.max_n = 2;
      report.bleu2 = 100.0 * bleu_corpus(preds, refs, bleu_opts);
    }
  }

  for (ExampleSlot& s : slots) report.per_example.push_back(std::move(s.score));
  return report;
}

}  // namespace vatika
