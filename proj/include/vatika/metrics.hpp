#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vatika/predictions.hpp"

namespace vatika {

class DatasetSplit;

// --- Tokenization ----------------------------------------------------------

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source_text;
};

// Devanagari-aware tokenizer shared by every lexical metric: NFC-normalize,
// split on Unicode whitespace, split danda/double danda/ASCII punctuation
// into standalone tokens and discard them, keep Devanagari letter and digit
// runs intact, lowercase Latin letters.
TokenSequence tokenize_hindi(std::string_view text);

// Compatibility mode: plain whitespace splitting, no punctuation handling.
TokenSequence tokenize_naive(std::string_view text);

using Tokenizer = TokenSequence (*)(std::string_view);

// --- Scores ----------------------------------------------------------------

struct PrfScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap. Zero when either side has no n-grams.
PrfScore rouge_n(const TokenSequence& pred, const TokenSequence& ref, int n);

// LCS-based: P = LCS/|pred|, R = LCS/|ref|, F = 2PR/(P+R).
PrfScore rouge_l(const TokenSequence& pred, const TokenSequence& ref);

// Exposed for the oracle tests.
size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

enum class BleuSmoothing { none, epsilon };

struct BleuOptions {
  int max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::none;
  // Substituted for a zero pooled match count under epsilon smoothing.
  double epsilon = 1e-9;
};

// Corpus-pooled BLEU in [0,1]: geometric mean of clipped modified n-gram
// precisions for n = 1..max_n times the length ratio penalty
// exp(1 - total_ref_len / total_pred_len). The penalty is applied
// unconditionally (1 exactly when the lengths match); clipping keeps the
// product within [0,1].
double bleu_corpus(const std::vector<TokenSequence>& preds, const std::vector<TokenSequence>& refs,
                   const BleuOptions& options = {});

// SQuAD-style bag-of-tokens F1 against the best reference. Both sides
// tokenized with the supplied tokenizer. Both empty -> 1, exactly one
// empty -> 0.
double qa_f1(std::string_view pred, const std::vector<std::string>& refs,
             Tokenizer tokenizer = &tokenize_hindi);
double qa_f1_tokens(const TokenSequence& pred, const TokenSequence& ref);

// --- BERTScore ---------------------------------------------------------------

// Produces one fixed-dimension vector per token.
class TokenEmbedder {
 public:
  virtual ~TokenEmbedder() = default;
  virtual int dimension() const = 0;
  virtual std::vector<double> embed(const std::string& token) = 0;
};

// Deterministic mock embedder: a unit vector drawn from an RNG seeded by the
// token's hash. Identical tokens embed identically; distinct tokens are
// nearly orthogonal in expectation.
class HashEmbedder final : public TokenEmbedder {
 public:
  explicit HashEmbedder(int dimension = 64, uint64_t seed = 0);
  int dimension() const override { return dimension_; }
  std::vector<double> embed(const std::string& token) override;

 private:
  int dimension_;
  uint64_t seed_;
};

// Exactly-orthogonal mock embedder: each distinct token gets its own one-hot
// axis, so cosine similarity is 1 for equal tokens and 0 otherwise. Capacity
// bounds the number of distinct tokens.
class OrthogonalEmbedder final : public TokenEmbedder {
 public:
  explicit OrthogonalEmbedder(int capacity = 1024);
  int dimension() const override { return capacity_; }
  std::vector<double> embed(const std::string& token) override;

 private:
  int capacity_;
  std::vector<std::string> interned_;
};

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Greedy cosine matching in both directions for one prediction/reference
// pair. Both-empty scores 1, exactly-one-empty scores 0.
BertScore bert_score_pair(const TokenSequence& pred, const TokenSequence& ref,
                          TokenEmbedder& embedder);

// Corpus means of the per-pair precision/recall/F (strings are tokenized with
// the supplied tokenizer).
BertScore bert_score(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                     TokenEmbedder& embedder, Tokenizer tokenizer = &tokenize_hindi);

// --- Corpus evaluation -------------------------------------------------------

struct MetricSelection {
  bool rouge1 = true;
  bool rouge2 = true;
  bool rougeL = true;
  bool bleu = true;   // corpus BLEU at bleu_max_n, reported in [0,1]
  bool bleu1 = true;  // reported in [0,100]
  bool bleu2 = true;  // reported in [0,100]
  bool qa_f1 = true;
  bool bertscore = false;
  int bleu_max_n = 4;
  BleuSmoothing smoothing = BleuSmoothing::none;
  bool naive_whitespace = false;  // compatibility tokenization for all lexical metrics
  int workers = 2;
};

struct PerExampleScore {
  std::string pair_id;
  std::optional<double> rouge1_f;
  std::optional<double> rouge2_f;
  std::optional<double> rougeL_f;
  std::optional<double> qa_f1;
  std::optional<double> bertscore_f;
};

// Corpus scores for one (model, split). ROUGE-*, QA-F1 and BERTScore corpus
// values are per-example means; BLEU values are corpus-pooled.
struct MetricReport {
  std::optional<double> rouge1_f;
  std::optional<double> rouge2_f;
  std::optional<double> rougeL_f;
  std::optional<double> bleu;
  std::optional<double> bleu1;
  std::optional<double> bleu2;
  std::optional<double> qa_f1;
  std::optional<double> bertscore_f;
  int bleu_max_n = 4;
  std::vector<PerExampleScore> per_example;

  std::string to_json() const;
  static MetricReport from_json(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static MetricReport load(const std::filesystem::path& path);

  std::string per_example_csv() const;
  std::string per_example_jsonl() const;
};

// Scores a prediction set against the gold split. Every prediction pair_id
// must exist in gold and vice versa (missing/extra ids are listed
// exhaustively); gold answers must all be present (held-out splits are
// refused). The embedder is required when selection.bertscore is set.
MetricReport evaluate_split(const std::vector<PredictionRow>& predictions,
                            const DatasetSplit& gold, const MetricSelection& selection,
                            TokenEmbedder* embedder = nullptr);

}  // namespace vatika
