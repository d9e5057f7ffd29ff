#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vatika/dataset.hpp"
#include "vatika/rng.hpp"

namespace vatika::testing {

namespace fs = std::filesystem;

inline fs::path fixture_path(const std::string& name) {
  return fs::path(VATIKA_FIXTURE_DIR) / name;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

// Self-deleting scratch directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "vatika-test") {
    const fs::path base = fs::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    for (int attempt = 0; attempt < 64; ++attempt) {
      fs::path candidate = base / (tag + "-" + std::to_string(rng() % 100000000));
      std::error_code ec;
      if (fs::create_directories(candidate, ec) && !ec) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("cannot create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

// --- Random text -------------------------------------------------------------

inline const std::vector<std::string>& hindi_words() {
  static const std::vector<std::string> words = {
      "वाराणसी", "गंगा",  "घाट",   "मंदिर",  "यात्रा", "संध्या", "आरती", "नदी",
      "किनारा", "इतिहास", "संस्कृति", "भोजन",  "गलियां", "काशी",  "पूजा",  "स्नान",
      "सुबह",   "शाम",   "किला",  "संगीत"};
  return words;
}

inline const std::vector<std::string>& latin_words() {
  static const std::vector<std::string> words = {"temple", "river", "city",  "ghat",  "morning",
                                                 "ritual", "music", "quiet", "train", "guide"};
  return words;
}

inline std::string random_word(std::mt19937_64& rng) {
  const bool hindi = bounded_rand(rng, 100) < 70;
  const auto& pool = hindi ? hindi_words() : latin_words();
  return pool[size_t(bounded_rand(rng, pool.size()))];
}

inline std::string random_sentence(std::mt19937_64& rng, size_t min_words = 1,
                                   size_t max_words = 10) {
  const size_t n = min_words + size_t(bounded_rand(rng, max_words - min_words + 1));
  std::string out;
  for (size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += random_word(rng);
  }
  return out;
}

// --- Random datasets -----------------------------------------------------------

inline DatasetSplit random_split(std::mt19937_64& rng, const std::string& name,
                                 size_t context_count, size_t max_pairs_per_context = 4,
                                 bool synthetic = false) {
  std::vector<ContextRecord> contexts;
  std::vector<QAPair> pairs;
  for (size_t c = 0; c < context_count; ++c) {
    const std::string context_id = name + "-c" + std::to_string(c);
    contexts.push_back({context_id, random_sentence(rng, 4, 14), name});
    const size_t k = 1 + bounded_rand(rng, max_pairs_per_context);
    for (size_t p = 0; p < k; ++p) {
      QAPair pair;
      pair.pair_id = context_id + "-p" + std::to_string(p);
      pair.context_id = context_id;
      pair.question = random_sentence(rng, 2, 9) + "?";
      pair.answer = random_sentence(rng, 2, 12);
      if (synthetic) {
        pair.provenance = Provenance::synthetic;
        pair.generator_id = "gen-" + name;
      }
      pairs.push_back(std::move(pair));
    }
  }
  return DatasetSplit(name, std::move(contexts), std::move(pairs));
}

// A fixed small split used across tests: 2 contexts, 5 pairs, all answered.
inline DatasetSplit toy_split(const std::string& name = "toy") {
  std::vector<ContextRecord> contexts = {
      {"c1", "वाराणसी के घाट गंगा नदी के किनारे स्थित हैं। यहाँ हर शाम गंगा आरती होती है।", name},
      {"c2", "सारनाथ वाराणसी से दस किलोमीटर दूर है। यहाँ बुद्ध ने पहला उपदेश दिया था।", name},
  };
  std::vector<QAPair> pairs;
  auto add = [&](const char* id, const char* ctx, const char* q, const char* a) {
    QAPair p;
    p.pair_id = id;
    p.context_id = ctx;
    p.question = q;
    p.answer = std::string(a);
    pairs.push_back(std::move(p));
  };
  add("p1", "c1", "गंगा आरती कब होती है?", "गंगा आरती हर शाम होती है।");
  add("p2", "c1", "घाट किस नदी के किनारे हैं?", "घाट गंगा नदी के किनारे हैं।");
  add("p3", "c1", "घाट कहाँ स्थित हैं?", "घाट वाराणसी में स्थित हैं।");
  add("p4", "c2", "सारनाथ कितनी दूर है?", "सारनाथ दस किलोमीटर दूर है।");
  add("p5", "c2", "पहला उपदेश किसने दिया?", "पहला उपदेश बुद्ध ने दिया था।");
  return DatasetSplit(name, std::move(contexts), std::move(pairs));
}

}  // namespace vatika::testing
