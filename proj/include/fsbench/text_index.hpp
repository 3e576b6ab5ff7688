#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fsbench {

// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t utf8_length(std::string_view text) noexcept;
// Longest prefix holding at most max_chars code points.
std::string_view utf8_prefix(std::string_view text, std::size_t max_chars) noexcept;

// Lowercased unigrams; any character that is not an ASCII letter or digit
// separates tokens. Bytes >= 0x80 are kept so UTF-8 words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// TF-IDF over a fixed document set, queried by cosine similarity.
//   tf  = raw term count
//   idf = ln((1 + N) / (1 + df)) + 1
// Query terms outside the vocabulary contribute nothing. Immutable once built.
class TfidfIndex {
 public:
  TfidfIndex() = default;
  explicit TfidfIndex(std::span<const std::string> documents);

  std::size_t size() const noexcept { return docs_.size(); }

  // Cosine similarity of the query against every document, in document order.
  // Zero-norm vectors score 0.
  std::vector<double> scores(std::string_view query) const;

 private:
  using SparseVector = std::vector<std::pair<std::size_t, double>>;  // sorted by term id

  SparseVector vectorize(std::string_view text) const;

  std::unordered_map<std::string, std::size_t> term_ids_;
  std::vector<double> idf_;
  std::vector<SparseVector> docs_;
  std::vector<double> norms_;
};

}  // namespace fsbench
