#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "helpers.hpp"
#include "vatika/dataset.hpp"
#include "vatika/errors.hpp"
#include "vatika/rng.hpp"

using namespace vatika;
using vatika::testing::TempDir;

namespace {

const char* kWellFormed =
    R"({"kind":"context","context_id":"c1","text":"पहला संदर्भ यहाँ है।"}
{"kind":"context","context_id":"c2","text":"दूसरा संदर्भ यहाँ है।"}
{"kind":"qa","pair_id":"p1","context_id":"c1","question":"प्रश्न एक?","answer":"उत्तर एक।","provenance":"original","generator_id":null}
{"kind":"qa","pair_id":"p2","context_id":"c1","question":"प्रश्न दो?","answer":"उत्तर दो।","provenance":"original","generator_id":null}
{"kind":"qa","pair_id":"p3","context_id":"c1","question":"प्रश्न तीन?","answer":"उत्तर तीन।","provenance":"original","generator_id":null}
{"kind":"qa","pair_id":"p4","context_id":"c2","question":"प्रश्न चार?","answer":"उत्तर चार।","provenance":"original","generator_id":null}
{"kind":"qa","pair_id":"p5","context_id":"c2","question":"प्रश्न पाँच?","answer":null,"provenance":"synthetic","generator_id":"big-lm"}
)";

}  // namespace

TEST_CASE("parse_dataset accepts a well-formed 2-context 5-pair file") {
  const DatasetSplit split = parse_dataset(kWellFormed, "train");
  CHECK(split.contexts().size() == 2);
  CHECK(split.pairs().size() == 5);
  CHECK(split.find_context("c2") != nullptr);
  CHECK(split.find_pair("p5")->provenance == Provenance::synthetic);
  CHECK(split.find_pair("p5")->answer == std::nullopt);
  CHECK_FALSE(split.all_answers_present());
}

TEST_CASE("parse_dataset rejects malformed entries with line numbers") {
  SUBCASE("unknown context reference names the id") {
    const std::string text =
        "{\"kind\":\"context\",\"context_id\":\"c1\",\"text\":\"ठीक\"}\n"
        "{\"kind\":\"qa\",\"pair_id\":\"p1\",\"context_id\":\"missing\",\"question\":\"क?\","
        "\"answer\":\"अ\",\"provenance\":\"original\",\"generator_id\":null}\n";
    CHECK_THROWS_WITH_AS(parse_dataset(text, "t"),
                         doctest::Contains("unknown context_id 'missing'"), SchemaError);
  }
  SUBCASE("invalid JSON reports the line") {
    CHECK_THROWS_WITH_AS(parse_dataset("{\"kind\":\"context\"\n", "t"),
                         doctest::Contains("line 1"), SchemaError);
  }
  SUBCASE("missing field is named") {
    CHECK_THROWS_WITH_AS(parse_dataset("{\"kind\":\"context\",\"context_id\":\"c\"}\n", "t"),
                         doctest::Contains("field 'text'"), SchemaError);
  }
  SUBCASE("duplicate pair id") {
    std::string text =
        "{\"kind\":\"context\",\"context_id\":\"c1\",\"text\":\"ठीक\"}\n";
    const std::string qa =
        "{\"kind\":\"qa\",\"pair_id\":\"p1\",\"context_id\":\"c1\",\"question\":\"क?\","
        "\"answer\":\"अ\",\"provenance\":\"original\",\"generator_id\":null}\n";
    text += qa + qa;
    CHECK_THROWS_WITH_AS(parse_dataset(text, "t"), doctest::Contains("duplicate pair_id"),
                         SchemaError);
  }
  SUBCASE("synthetic pair without generator_id") {
    const std::string text =
        "{\"kind\":\"context\",\"context_id\":\"c1\",\"text\":\"ठीक\"}\n"
        "{\"kind\":\"qa\",\"pair_id\":\"p1\",\"context_id\":\"c1\",\"question\":\"क?\","
        "\"answer\":\"अ\",\"provenance\":\"synthetic\",\"generator_id\":null}\n";
    CHECK_THROWS_WITH_AS(parse_dataset(text, "t"), doctest::Contains("generator_id"), SchemaError);
  }
  SUBCASE("empty question") {
    const std::string text =
        "{\"kind\":\"context\",\"context_id\":\"c1\",\"text\":\"ठीक\"}\n"
        "{\"kind\":\"qa\",\"pair_id\":\"p1\",\"context_id\":\"c1\",\"question\":\"  \","
        "\"answer\":\"अ\",\"provenance\":\"original\",\"generator_id\":null}\n";
    CHECK_THROWS_WITH_AS(parse_dataset(text, "t"), doctest::Contains("question"), SchemaError);
  }
  SUBCASE("unknown kind") {
    CHECK_THROWS_AS(parse_dataset("{\"kind\":\"banana\"}\n", "t"), SchemaError);
  }
}

TEST_CASE("ingest_dataset reads files and fails on missing paths") {
  TempDir dir;
  CHECK_THROWS_AS(ingest_dataset(dir / "absent.jsonl", "x"), ValidationError);
  testing::write_file(dir / "data.jsonl", kWellFormed);
  const DatasetSplit split = ingest_dataset(dir / "data.jsonl", "train");
  CHECK(split.pairs().size() == 5);

  // Schema errors from a file carry both the file name and the line.
  testing::write_file(dir / "bad.jsonl", "{\"kind\":\"context\",\"context_id\":\"c\"}\n");
  try {
    ingest_dataset(dir / "bad.jsonl", "x");
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bad.jsonl") != std::string::npos);
    CHECK(msg.find("line 1") != std::string::npos);
  }
}

TEST_CASE("ingest(serialize(split)) round-trips" * doctest::description("property")) {
  std::mt19937_64 rng(41);
  for (int i = 0; i < 25; ++i) {
    const DatasetSplit split = testing::random_split(rng, "s" + std::to_string(i), 1 + i % 5);
    const DatasetSplit back = parse_dataset(serialize_dataset(split), split.name());
    CHECK(back == split);
    CHECK(dataset_digest(back) == dataset_digest(split));
  }
}

TEST_CASE("compute_statistics") {
  SUBCASE("single context, single pair") {
    DatasetSplit split("s", {{"c", "क ख ग", "s"}},
                       {{"p", "c", "एक दो तीन", std::string("एक दो तीन चार"),
                         Provenance::original, std::nullopt, std::nullopt}});
    const SplitStatistics stats = compute_statistics(split);
    CHECK(stats.context_count == 1);
    CHECK(stats.qa_count == 1);
    CHECK(stats.qa_per_context == doctest::Approx(1.0));
    CHECK(stats.mean_question_len == doctest::Approx(3.0));
    CHECK(stats.mean_answer_len.value() == doctest::Approx(4.0));
  }

  SUBCASE("10-pair split matches a spreadsheet-style recount") {
    std::mt19937_64 rng(7);
    std::vector<ContextRecord> contexts{{"c0", "संदर्भ पाठ", "s"}, {"c1", "और पाठ", "s"}};
    std::vector<QAPair> pairs;
    size_t question_words = 0, answer_words = 0;
    for (int i = 0; i < 10; ++i) {
      QAPair p;
      p.pair_id = "p" + std::to_string(i);
      p.context_id = i % 2 ? "c1" : "c0";
      p.question = testing::random_sentence(rng, 1, 9);
      p.answer = testing::random_sentence(rng, 1, 14);
      // Independent recount: count space-delimited chunks.
      auto count = [](const std::string& s) {
        std::istringstream in(s);
        std::string w;
        size_t n = 0;
        while (in >> w) ++n;
        return n;
      };
      question_words += count(p.question);
      answer_words += count(*p.answer);
      pairs.push_back(std::move(p));
    }
    const SplitStatistics stats =
        compute_statistics(DatasetSplit("s", std::move(contexts), std::move(pairs)));
    CHECK(stats.qa_count == 10);
    CHECK(stats.mean_question_len == doctest::Approx(double(question_words) / 10.0).epsilon(1e-12));
    CHECK(stats.mean_answer_len.value() ==
          doctest::Approx(double(answer_words) / 10.0).epsilon(1e-12));
  }

  SUBCASE("counts are invariant under pair reordering") {
    std::mt19937_64 rng(11);
    DatasetSplit split = testing::random_split(rng, "s", 4);
    const SplitStatistics before = compute_statistics(split);
    std::vector<QAPair> reordered = split.pairs();
    seeded_shuffle(reordered, 99);
    const SplitStatistics after =
        compute_statistics(DatasetSplit("s", split.contexts(), std::move(reordered)));
    CHECK(before.qa_count == after.qa_count);
    CHECK(before.mean_question_len == doctest::Approx(after.mean_question_len).epsilon(1e-12));
    CHECK(before.qa_per_context == doctest::Approx(after.qa_per_context).epsilon(1e-12));
  }

  SUBCASE("qa_per_context times context_count equals qa_count") {
    std::mt19937_64 rng(13);
    for (int i = 0; i < 10; ++i) {
      const DatasetSplit split = testing::random_split(rng, "s", 1 + i);
      const SplitStatistics stats = compute_statistics(split);
      CHECK(stats.qa_per_context * double(stats.context_count) ==
            doctest::Approx(double(stats.qa_count)).epsilon(1e-12));
    }
  }

  SUBCASE("zero contexts is a degenerate input") {
    CHECK_THROWS_AS(compute_statistics(DatasetSplit("empty", {}, {})), DegenerateInputError);
  }

  SUBCASE("mean_answer_len is absent iff any answer is absent") {
    const DatasetSplit split = parse_dataset(kWellFormed, "t");
    CHECK_FALSE(compute_statistics(split).mean_answer_len.has_value());
  }
}

TEST_CASE("merge_splits") {
  std::mt19937_64 rng(17);

  SUBCASE("merge of one split is the identity up to the name") {
    const DatasetSplit split = testing::random_split(rng, "only", 3);
    const DatasetSplit merged = merge_splits({split}, "only");
    CHECK(merged == split);
  }

  SUBCASE("disjoint 2-pair splits merge to 4 pairs with both contexts") {
    const DatasetSplit a = testing::random_split(rng, "a", 1, 2);
    const DatasetSplit b = testing::random_split(rng, "b", 1, 2);
    // random_split may give 1-2 pairs; rebuild with exactly 2 each.
    auto two = [](const std::string& name) {
      std::vector<QAPair> pairs;
      for (int i = 0; i < 2; ++i)
        pairs.push_back({name + "-p" + std::to_string(i), name + "-c", "प्रश्न?",
                         std::string("उत्तर"), Provenance::original, std::nullopt, std::nullopt});
      return DatasetSplit(name, {{name + "-c", "पाठ", name}}, std::move(pairs));
    };
    const DatasetSplit merged = merge_splits({two("x"), two("y")}, "xy");
    CHECK(merged.pairs().size() == 4);
    CHECK(merged.contexts().size() == 2);
  }

  SUBCASE("paper-shaped merge count: 13092 + 33000 + 4000 = 50092") {
    auto bulk = [](const std::string& name, size_t pairs_count, bool synthetic) {
      std::vector<ContextRecord> contexts{{name + "-c", "संदर्भ पाठ यहाँ", name}};
      std::vector<QAPair> pairs;
      pairs.reserve(pairs_count);
      for (size_t i = 0; i < pairs_count; ++i) {
        QAPair p;
        p.pair_id = name + "-p" + std::to_string(i);
        p.context_id = name + "-c";
        p.question = "प्रश्न?";
        p.answer = std::string("उत्तर");
        if (synthetic) {
          p.provenance = Provenance::synthetic;
          p.generator_id = name;
        }
        pairs.push_back(std::move(p));
      }
      return DatasetSplit(name, std::move(contexts), std::move(pairs));
    };
    const DatasetSplit merged = merge_splits(
        {bulk("train", 13092, false), bulk("phi", 33000, true), bulk("llama", 4000, true)},
        "combined");
    CHECK(merged.pairs().size() == 50092);
  }

  SUBCASE("merge is associative up to ordering and idempotent on disjoint inputs") {
    const DatasetSplit a = testing::random_split(rng, "aa", 2);
    const DatasetSplit b = testing::random_split(rng, "bb", 2);
    const DatasetSplit c = testing::random_split(rng, "cc", 2);
    const DatasetSplit left = merge_splits({merge_splits({a, b}, "ab"), c}, "abc");
    const DatasetSplit right = merge_splits({a, merge_splits({b, c}, "bc")}, "abc");
    auto ids = [](const DatasetSplit& s) {
      std::vector<std::string> out;
      for (const QAPair& p : s.pairs()) out.push_back(p.pair_id);
      std::sort(out.begin(), out.end());
      return out;
    };
    CHECK(ids(left) == ids(right));
    CHECK(merge_splits({a}, "aa") == a);
  }

  SUBCASE("conflicting context texts for one id are rejected") {
    DatasetSplit a("a", {{"shared", "पहला पाठ", "a"}}, {});
    DatasetSplit b("b", {{"shared", "दूसरा पाठ", "b"}}, {});
    CHECK_THROWS_WITH_AS(merge_splits({a, b}, "m"), doctest::Contains("conflicting texts"),
                         ValidationError);
  }

  SUBCASE("colliding pair ids are namespaced by source split") {
    auto mk = [](const std::string& name) {
      return DatasetSplit(name, {{"c", "पाठ", name}},
                          {{"p1", "c", "प्रश्न?", std::string("उत्तर"), Provenance::original,
                            std::nullopt, std::nullopt}});
    };
    const DatasetSplit merged = merge_splits({mk("a"), mk("b")}, "m");
    REQUIRE(merged.pairs().size() == 2);
    CHECK(merged.pairs()[0].pair_id == "p1");
    CHECK(merged.pairs()[1].pair_id == "b/p1");
  }
}
