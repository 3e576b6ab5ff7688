#include "fsbench/text_index.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fsbench {
namespace {

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

double norm(const std::vector<std::pair<std::size_t, double>>& v) {
  double sum = 0.0;
  for (const auto& [_, w] : v) sum += w * w;
  return std::sqrt(sum);
}

bool is_continuation(char c) { return (static_cast<unsigned char>(c) & 0xC0) == 0x80; }

}  // namespace

std::size_t utf8_length(std::string_view text) noexcept {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) { return !is_continuation(c); }));
}

std::string_view utf8_prefix(std::string_view text, std::size_t max_chars) noexcept {
  std::size_t chars = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (is_continuation(text[i])) continue;
    if (chars == max_chars) return text.substr(0, i);
    ++chars;
  }
  return text;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_token_char(c)) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : ch);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

TfidfIndex::TfidfIndex(std::span<const std::string> documents) {
  std::vector<std::map<std::size_t, double>> counts(documents.size());
  std::vector<std::size_t> df;
  for (std::size_t d = 0; d < documents.size(); ++d) {
    for (auto& tok : tokenize(documents[d])) {
      auto [it, inserted] = term_ids_.try_emplace(std::move(tok), term_ids_.size());
      if (inserted) df.push_back(0);
      if (counts[d][it->second]++ == 0) ++df[it->second];
    }
  }
  const double n = static_cast<double>(documents.size());
  idf_.resize(df.size());
  for (std::size_t t = 0; t < df.size(); ++t) {
    idf_[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(df[t]))) + 1.0;
  }
  docs_.reserve(documents.size());
  norms_.reserve(documents.size());
  for (auto& c : counts) {
    SparseVector v;
    v.reserve(c.size());
    for (const auto& [term, tf] : c) v.emplace_back(term, tf * idf_[term]);
    norms_.push_back(norm(v));
    docs_.push_back(std::move(v));
  }
}

TfidfIndex::SparseVector TfidfIndex::vectorize(std::string_view text) const {
  std::map<std::size_t, double> counts;
  for (const auto& tok : tokenize(text)) {
    if (auto it = term_ids_.find(tok); it != term_ids_.end()) counts[it->second] += 1.0;
  }
  SparseVector v;
  v.reserve(counts.size());
  for (const auto& [term, tf] : counts) v.emplace_back(term, tf * idf_[term]);
  return v;
}

std::vector<double> TfidfIndex::scores(std::string_view query) const {
  const auto q = vectorize(query);
  const double qn = norm(q);
  std::vector<double> out(docs_.size(), 0.0);
  if (qn == 0.0) return out;
  for (std::size_t d = 0; d < docs_.size(); ++d) {
    if (norms_[d] == 0.0) continue;
    double dot = 0.0;
    auto a = q.begin();
    auto b = docs_[d].begin();
    while (a != q.end() && b != docs_[d].end()) {
      if (a->first < b->first) {
        ++a;
      } else if (b->first < a->first) {
        ++b;
      } else {
        dot += a->second * b->second;
        ++a;
        ++b;
      }
    }
    out[d] = dot / (qn * norms_[d]);
  }
  return out;
}

}  // namespace fsbench
