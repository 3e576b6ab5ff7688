#include <doctest.h>

#include <cctype>
#include <cmath>
#include <map>
#include <set>

#include "fsbench/digest.hpp"
#include "fsbench/text_index.hpp"

using namespace fsbench;

namespace {

// Reference TF-IDF written against plain maps, sharing nothing with TfidfIndex.
struct RefTfidf {
  std::vector<std::map<std::string, double>> docs;
  std::map<std::string, double> idf;

  static std::vector<std::string> words(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
      if (std::isalnum(c) || c >= 0x80) {
        cur += static_cast<char>(std::tolower(c));
      } else if (!cur.empty()) {
        out.push_back(cur);
        cur.clear();
      }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
  }

  explicit RefTfidf(const std::vector<std::string>& texts) {
    std::map<std::string, int> df;
    std::vector<std::map<std::string, double>> tf;
    for (const auto& t : texts) {
      std::map<std::string, double> counts;
      for (const auto& w : words(t)) counts[w] += 1;
      for (const auto& [w, _] : counts) df[w] += 1;
      tf.push_back(counts);
    }
    const double n = static_cast<double>(texts.size());
    for (const auto& [w, d] : df) idf[w] = std::log((1 + n) / (1 + d)) + 1;
    for (auto& counts : tf) {
      for (auto& [w, v] : counts) v *= idf[w];
      docs.push_back(counts);
    }
  }

  double cosine(const std::string& query, std::size_t i) const {
    std::map<std::string, double> q;
    for (const auto& w : words(query)) {
      if (idf.count(w)) q[w] += 1;
    }
    for (auto& [w, v] : q) v *= idf.at(w);
    double dot = 0, nq = 0, nd = 0;
    for (const auto& [w, v] : q) {
      nq += v * v;
      if (auto it = docs[i].find(w); it != docs[i].end()) dot += v * it->second;
    }
    for (const auto& [_, v] : docs[i]) nd += v * v;
    return (nq == 0 || nd == 0) ? 0.0 : dot / std::sqrt(nq * nd);
  }
};

}  // namespace

TEST_CASE("utf8 helpers") {
  CHECK(utf8_length("") == 0);
  CHECK(utf8_length("abc") == 3);
  CHECK(utf8_length("caf\xC3\xA9") == 4);
  CHECK(utf8_length("\xE2\x80\x94") == 1);
  CHECK(utf8_prefix("caf\xC3\xA9s", 4) == "caf\xC3\xA9");
  CHECK(utf8_prefix("abc", 10) == "abc");
}

TEST_CASE("tokenize lowercases and splits on punctuation") {
  CHECK(tokenize("Apple's Q4: record-high, 12% up!") ==
        std::vector<std::string>{"apple", "s", "q4", "record", "high", "12", "up"});
  CHECK(tokenize("  ").empty());
}

TEST_CASE("tfidf scores match a reference implementation") {
  const std::vector<std::string> docs{
      "Company issues product recall for faulty batteries after fire reports",
      "Quarterly earnings beat estimates as revenue grows",
      "Board raises quarterly dividend and announces buyback",
      "Recall expands to second battery model",
      "",
  };
  const TfidfIndex index(docs);
  const RefTfidf ref(docs);
  for (const char* q : {"Regulator orders recall of faulty heaters", "earnings and dividend news",
                        "nothing in common here", "battery battery recall"}) {
    const auto got = index.scores(q);
    REQUIRE(got.size() == docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) CHECK(got[i] == doctest::Approx(ref.cosine(q, i)).epsilon(1e-12));
  }
  CHECK(index.scores("recall")[4] == 0.0);
}

TEST_CASE("sha256 digests") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
