#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "vatika/errors.hpp"
#include "vatika/metrics.hpp"

using namespace vatika;

namespace {

TokenSequence seq(std::initializer_list<const char*> tokens) {
  TokenSequence s;
  for (const char* t : tokens) s.tokens.emplace_back(t);
  return s;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, size_t max_len, int alphabet) {
  const size_t len = size_t(bounded_rand(rng, max_len + 1));
  std::vector<std::string> out;
  out.reserve(len);
  for (size_t i = 0; i < len; ++i)
    out.push_back(std::string(1, char('a' + bounded_rand(rng, uint64_t(alphabet)))));
  return out;
}

}  // namespace

TEST_CASE("rouge_n fixtures") {
  SUBCASE("identity scores 1") {
    const TokenSequence x = seq({"क", "ख", "ग"});
    for (int n = 1; n <= 3; ++n) {
      const PrfScore s = rouge_n(x, x, n);
      CHECK(s.precision == doctest::Approx(1.0));
      CHECK(s.recall == doctest::Approx(1.0));
      CHECK(s.f1 == doctest::Approx(1.0));
    }
  }
  SUBCASE("disjoint token sets score 0") {
    const PrfScore s = rouge_n(seq({"a", "b"}), seq({"c", "d"}), 1);
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("pred [a b c], ref [a c]: P=2/3, R=1, F=0.8") {
    const PrfScore s = rouge_n(seq({"a", "b", "c"}), seq({"a", "c"}), 1);
    CHECK(s.precision == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(0.8).epsilon(1e-12));
  }
  SUBCASE("n beyond both lengths scores 0") {
    const PrfScore s = rouge_n(seq({"a"}), seq({"a"}), 2);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("n must be positive") { CHECK_THROWS_AS(rouge_n(seq({}), seq({}), 0), ValidationError); }
}

TEST_CASE("rouge_l fixtures") {
  SUBCASE("identity") { CHECK(rouge_l(seq({"क", "ख"}), seq({"क", "ख"})).f1 == doctest::Approx(1.0)); }
  SUBCASE("[a b c d] vs [a c b d] -> 0.75") {
    const PrfScore s = rouge_l(seq({"a", "b", "c", "d"}), seq({"a", "c", "b", "d"}));
    CHECK(s.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(0.75).epsilon(1e-12));
  }
  SUBCASE("empty side scores 0") {
    const PrfScore s = rouge_l(seq({}), seq({"a"}));
    CHECK(s.precision == 0.0);
    CHECK(s.recall == 0.0);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("operand swap exchanges precision and recall") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
      TokenSequence a, b;
      a.tokens = random_tokens(rng, 8, 4);
      b.tokens = random_tokens(rng, 8, 4);
      const PrfScore ab = rouge_l(a, b);
      const PrfScore ba = rouge_l(b, a);
      CHECK(ab.precision == doctest::Approx(ba.recall).epsilon(1e-12));
      CHECK(ab.recall == doctest::Approx(ba.precision).epsilon(1e-12));
    }
  }
}

TEST_CASE("lcs_length matches the exhaustive subsequence oracle on short sequences") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 3000; ++i) {
    const std::vector<std::string> a = random_tokens(rng, 8, 4);
    const std::vector<std::string> b = random_tokens(rng, 8, 4);
    std::vector<uint8_t> ai, bi;
    for (const std::string& t : a) ai.push_back(uint8_t(t[0]));
    for (const std::string& t : b) bi.push_back(uint8_t(t[0]));
    CHECK(lcs_length(a, b) == oracle::lcs_exhaustive(ai, bi));
  }
}

TEST_CASE("bleu fixtures") {
  SUBCASE("perfect match scores 1 exactly") {
    const std::vector<TokenSequence> c{seq({"क", "ख", "ग"}), seq({"घ"})};
    CHECK(bleu_corpus(c, c, {2, BleuSmoothing::none, 1e-9}) == 1.0);
  }
  SUBCASE("[the the the] vs [the cat]: BLEU-1 = (1/3)·e^{1/3}") {
    const double got = bleu_corpus({seq({"the", "the", "the"})}, {seq({"the", "cat"})},
                                   {1, BleuSmoothing::none, 1e-9});
    CHECK(std::abs(got - (1.0 / 3.0) * std::exp(1.0 / 3.0)) < 1e-9);
  }
  SUBCASE("corpus pooling keeps the score positive iff pooled bigram count is positive") {
    // Sentence 1 has no bigram match; sentence 2 does. Pooled BLEU-2 > 0.
    const std::vector<TokenSequence> preds{seq({"a", "x", "b"}), seq({"c", "d"})};
    const std::vector<TokenSequence> refs{seq({"a", "b"}), seq({"c", "d"})};
    CHECK(bleu_corpus(preds, refs, {2, BleuSmoothing::none, 1e-9}) > 0.0);
    // No bigram matches anywhere -> 0 without smoothing.
    const std::vector<TokenSequence> none{seq({"a", "x", "b"})};
    const std::vector<TokenSequence> ref1{seq({"a", "b"})};
    CHECK(bleu_corpus(none, ref1, {2, BleuSmoothing::none, 1e-9}) == 0.0);
    CHECK(bleu_corpus(none, ref1, {2, BleuSmoothing::epsilon, 1e-9}) > 0.0);
  }
  SUBCASE("list length mismatch is an error") {
    CHECK_THROWS_AS(bleu_corpus({seq({"a"})}, {}, {}), ValidationError);
  }
  SUBCASE("empty corpus is an error") {
    CHECK_THROWS_AS(bleu_corpus({}, {}, {}), ValidationError);
  }
}

TEST_CASE("bleu equals mean pooled clipped unigram precision when lengths match") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    // Equal total lengths -> the length penalty is exp(0) = 1.
    std::vector<TokenSequence> preds, refs;
    long matches = 0, candidates = 0;
    const size_t sentences = 1 + bounded_rand(rng, 4);
    for (size_t s = 0; s < sentences; ++s) {
      const std::vector<std::string> tokens = random_tokens(rng, 7, 3);
      TokenSequence pred, ref;
      pred.tokens = tokens;
      ref.tokens = tokens;
      seeded_shuffle(ref.tokens, rng());
      preds.push_back(pred);
      refs.push_back(ref);
      candidates += long(tokens.size());
      matches += long(tokens.size());  // same bag -> every unigram clips to itself
    }
    if (candidates == 0) continue;
    const double got = bleu_corpus(preds, refs, {1, BleuSmoothing::none, 1e-9});
    CHECK(got == doctest::Approx(double(matches) / double(candidates)).epsilon(1e-12));
  }
}

TEST_CASE("bleu matches the brute-force oracle on randomized corpora") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const size_t sentences = 1 + bounded_rand(rng, 6);
    std::vector<TokenSequence> preds, refs;
    std::vector<std::vector<std::string>> rp, rr;
    for (size_t s = 0; s < sentences; ++s) {
      TokenSequence p, r;
      p.tokens = random_tokens(rng, 10, 5);
      r.tokens = random_tokens(rng, 10, 5);
      rp.push_back(p.tokens);
      rr.push_back(r.tokens);
      preds.push_back(std::move(p));
      refs.push_back(std::move(r));
    }
    for (int max_n : {1, 2, 4}) {
      const double got = bleu_corpus(preds, refs, {max_n, BleuSmoothing::none, 1e-9});
      const double want = oracle::bleu_exhaustive(rp, rr, max_n);
      CHECK(std::abs(got - want) < 1e-9);
    }
  }
}

TEST_CASE("qa_f1 fixtures") {
  SUBCASE("identity") { CHECK(qa_f1("नई दिल्ली", {"नई दिल्ली"}) == doctest::Approx(1.0)); }
  SUBCASE("नई दिल्ली vs दिल्ली -> 2/3") {
    CHECK(std::abs(qa_f1("नई दिल्ली", {"दिल्ली"}) - 2.0 / 3.0) < 1e-9);
  }
  SUBCASE("empty prediction vs non-empty reference -> 0") {
    CHECK(qa_f1("", {"दिल्ली"}) == 0.0);
    CHECK(qa_f1("।", {"दिल्ली"}) == 0.0);  // punctuation-only tokenizes to empty
  }
  SUBCASE("both sides empty -> 1") { CHECK(qa_f1("", {""}) == 1.0); }
  SUBCASE("max over references") {
    CHECK(qa_f1("क ख", {"ग", "क ख"}) == doctest::Approx(1.0));
  }
  SUBCASE("empty reference list is an error") { CHECK_THROWS_AS(qa_f1("क", {}), ValidationError); }
  SUBCASE("bag semantics: invariant under reordering") {
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
      TokenSequence a, b;
      a.tokens = random_tokens(rng, 8, 4);
      b.tokens = random_tokens(rng, 8, 4);
      TokenSequence as = a, bs = b;
      seeded_shuffle(as.tokens, rng());
      seeded_shuffle(bs.tokens, rng());
      CHECK(qa_f1_tokens(a, b) == doctest::Approx(qa_f1_tokens(as, bs)).epsilon(1e-12));
    }
  }
  SUBCASE("agrees with the sorted-intersection oracle") {
    std::mt19937_64 rng(23);
    for (int i = 0; i < 300; ++i) {
      TokenSequence a, b;
      a.tokens = random_tokens(rng, 9, 4);
      b.tokens = random_tokens(rng, 9, 4);
      CHECK(qa_f1_tokens(a, b) ==
            doctest::Approx(oracle::qa_f1_exhaustive(a.tokens, b.tokens)).epsilon(1e-12));
    }
  }
}

TEST_CASE("bert_score") {
  SUBCASE("identical strings score exactly 1 under the hash embedder") {
    HashEmbedder embedder;
    const BertScore s = bert_score({"गंगा आरती शाम"}, {"गंगा आरती शाम"}, embedder);
    CHECK(std::abs(s.f1 - 1.0) < 1e-9);
  }
  SUBCASE("disjoint token sets score 0 under the orthogonal embedder") {
    OrthogonalEmbedder embedder(64);
    const BertScore s = bert_score({"क ख ग"}, {"घ ङ च"}, embedder);
    CHECK(s.f1 == 0.0);
  }
  SUBCASE("3-pair toy corpus equals the dense greedy-match oracle") {
    HashEmbedder embedder(48, 7);
    const std::vector<std::string> preds{"गंगा घाट शाम", "मंदिर की यात्रा", "भोजन अच्छा था"};
    const std::vector<std::string> refs{"गंगा घाट की शाम", "यात्रा लंबी थी", "भोजन बहुत अच्छा था"};
    double f_sum = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
      const TokenSequence p = tokenize_hindi(preds[i]);
      const TokenSequence r = tokenize_hindi(refs[i]);
      std::vector<std::vector<double>> pv, rv;
      for (const std::string& t : p.tokens) pv.push_back(embedder.embed(t));
      for (const std::string& t : r.tokens) rv.push_back(embedder.embed(t));
      f_sum += oracle::bert_exhaustive(pv, rv).f1;
    }
    const BertScore corpus = bert_score(preds, refs, embedder);
    CHECK(corpus.f1 == doctest::Approx(f_sum / 3.0).epsilon(1e-12));
  }
  SUBCASE("embedder capacity exhaustion is reported") {
    OrthogonalEmbedder tiny(1);
    CHECK_NOTHROW(tiny.embed("एक"));
    CHECK_THROWS_AS(tiny.embed("दो"), ValidationError);
  }
}

TEST_CASE("all metric outputs stay in range on random inputs" * doctest::description("property")) {
  std::mt19937_64 rng(31);
  HashEmbedder embedder;
  for (int i = 0; i < 200; ++i) {
    TokenSequence a, b;
    a.tokens = random_tokens(rng, 10, 5);
    b.tokens = random_tokens(rng, 10, 5);
    for (int n = 1; n <= 3; ++n) {
      const PrfScore s = rouge_n(a, b, n);
      CHECK(s.f1 >= 0.0);
      CHECK(s.f1 <= 1.0);
    }
    const PrfScore l = rouge_l(a, b);
    CHECK(l.f1 >= 0.0);
    CHECK(l.f1 <= 1.0);
    const double q = qa_f1_tokens(a, b);
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);
    if (!a.tokens.empty() || !b.tokens.empty()) {
      const double bl = bleu_corpus({a}, {b}, {2, BleuSmoothing::none, 1e-9});
      CHECK(bl >= 0.0);
      CHECK(bl <= 1.0 + 1e-12);
      const BertScore bs = bert_score_pair(a, b, embedder);
      CHECK(bs.f1 >= 0.0);
      CHECK(bs.f1 <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("adding an exact-match pair never decreases corpus BLEU or mean QA-F1") {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<TokenSequence> preds, refs;
    const size_t n = 1 + bounded_rand(rng, 5);
    for (size_t i = 0; i < n; ++i) {
      TokenSequence p, r;
      p.tokens = random_tokens(rng, 8, 3);
      r.tokens = random_tokens(rng, 8, 3);
      preds.push_back(std::move(p));
      refs.push_back(std::move(r));
    }
    TokenSequence exact;
    exact.tokens = random_tokens(rng, 8, 3);
    if (exact.tokens.empty()) exact.tokens.push_back("a");

    const double bleu_before = bleu_corpus(preds, refs, {1, BleuSmoothing::none, 1e-9});
    double qa_before = 0.0;
    for (size_t i = 0; i < n; ++i) qa_before += qa_f1_tokens(preds[i], refs[i]);
    qa_before /= double(n);

    preds.push_back(exact);
    refs.push_back(exact);
    const double bleu_after = bleu_corpus(preds, refs, {1, BleuSmoothing::none, 1e-9});
    double qa_after = 0.0;
    for (size_t i = 0; i < n + 1; ++i) qa_after += qa_f1_tokens(preds[i], refs[i]);
    qa_after /= double(n + 1);

    CHECK(bleu_after >= bleu_before - 1e-12);
    CHECK(qa_after >= qa_before - 1e-12);
  }
}

TEST_CASE("evaluate_split") {
  const DatasetSplit gold = testing::toy_split();

  auto identity_rows = [&] {
    std::vector<PredictionRow> rows;
    for (const QAPair& p : gold.pairs()) rows.push_back({p.pair_id, *p.answer});
    return rows;
  };

  SUBCASE("identity corpus scores 1.0 on every metric") {
    MetricSelection sel;
    sel.bertscore = true;
    HashEmbedder embedder;
    const MetricReport r = evaluate_split(identity_rows(), gold, sel, &embedder);
    CHECK(std::abs(*r.rouge1_f - 1.0) < 1e-9);
    CHECK(std::abs(*r.rouge2_f - 1.0) < 1e-9);
    CHECK(std::abs(*r.rougeL_f - 1.0) < 1e-9);
    CHECK(std::abs(*r.bleu - 1.0) < 1e-9);
    CHECK(std::abs(*r.bleu1 - 100.0) < 1e-7);
    CHECK(std::abs(*r.bleu2 - 100.0) < 1e-7);
    CHECK(std::abs(*r.qa_f1 - 1.0) < 1e-9);
    CHECK(std::abs(*r.bertscore_f - 1.0) < 1e-9);
    CHECK(r.per_example.size() == gold.pairs().size());
  }

  SUBCASE("missing and extra prediction ids are listed exhaustively") {
    std::vector<PredictionRow> rows = identity_rows();
    rows.pop_back();                      // p5 missing
    rows.push_back({"ghost", "उत्तर"});  // unknown id
    try {
      evaluate_split(rows, gold, MetricSelection{}, nullptr);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("p5") != std::string::npos);
      CHECK(msg.find("ghost") != std::string::npos);
    }
  }

  SUBCASE("held-out gold answers are refused") {
    std::vector<QAPair> pairs = gold.pairs();
    pairs[1].answer = std::nullopt;
    const DatasetSplit heldout("test2", gold.contexts(), std::move(pairs));
    std::vector<PredictionRow> rows;
    for (const QAPair& p : heldout.pairs()) rows.push_back({p.pair_id, "x"});
    CHECK_THROWS_WITH_AS(evaluate_split(rows, heldout, MetricSelection{}, nullptr),
                         doctest::Contains("held-out"), ValidationError);
  }

  SUBCASE("corpus values equal per-metric recomputation from per-example scores") {
    std::mt19937_64 rng(43);
    std::vector<PredictionRow> rows;
    for (const QAPair& p : gold.pairs())
      rows.push_back({p.pair_id, testing::random_sentence(rng, 1, 8)});
    const MetricReport r = evaluate_split(rows, gold, MetricSelection{}, nullptr);
    double rl = 0, q = 0;
    for (const PerExampleScore& e : r.per_example) {
      rl += *e.rougeL_f;
      q += *e.qa_f1;
    }
    CHECK(*r.rougeL_f == doctest::Approx(rl / double(r.per_example.size())).epsilon(1e-12));
    CHECK(*r.qa_f1 == doctest::Approx(q / double(r.per_example.size())).epsilon(1e-12));
  }

  SUBCASE("bertscore selection without an embedder is an error") {
    MetricSelection sel;
    sel.bertscore = true;
    CHECK_THROWS_AS(evaluate_split(identity_rows(), gold, sel, nullptr), ValidationError);
  }

  SUBCASE("naive whitespace compatibility mode changes punctuation handling") {
    // Prediction differs from gold only by a trailing danda: equal under the
    // Devanagari-aware tokenizer, unequal under naive splitting.
    std::vector<PredictionRow> rows;
    for (const QAPair& p : gold.pairs()) rows.push_back({p.pair_id, *p.answer + "॥"});
    MetricSelection aware;
    const MetricReport a = evaluate_split(rows, gold, aware, nullptr);
    CHECK(std::abs(*a.qa_f1 - 1.0) < 1e-9);
    MetricSelection naive;
    naive.naive_whitespace = true;
    const MetricReport b = evaluate_split(rows, gold, naive, nullptr);
    CHECK(*b.qa_f1 < 1.0);
  }
}

TEST_CASE("metric report JSON and exports round-trip") {
  MetricReport r;
  r.rougeL_f = 0.8971;
  r.bleu = 0.7991;
  r.bleu1 = 63.74;
  r.qa_f1 = 0.5759;
  r.bleu_max_n = 4;
  r.per_example.push_back({"p1", 0.5, std::nullopt, 0.75, 1.0, std::nullopt});

  const MetricReport back = MetricReport::from_json(r.to_json());
  CHECK(back.rougeL_f == r.rougeL_f);
  CHECK(back.bleu == r.bleu);
  CHECK(back.bleu1 == r.bleu1);
  CHECK_FALSE(back.rouge1_f.has_value());
  REQUIRE(back.per_example.size() == 1);
  CHECK(back.per_example[0].pair_id == "p1");
  CHECK(back.per_example[0].rougeL_f == 0.75);

  const std::string csv = r.per_example_csv();
  CHECK(csv.find("pair_id,rouge1_f") == 0);
  CHECK(csv.find("p1,0.5,,0.75,1.0,") != std::string::npos);
  const std::string jsonl = r.per_example_jsonl();
  CHECK(jsonl.find("\"pair_id\":\"p1\"") != std::string::npos);
}
