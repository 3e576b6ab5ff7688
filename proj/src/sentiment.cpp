#include "fsbench/sentiment.hpp"

#include <algorithm>
#include <cctype>

namespace fsbench {
namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

std::string_view to_string(Sentiment s) noexcept {
  switch (s) {
    case Sentiment::Positive: return "Positive";
    case Sentiment::Negative: return "Negative";
    case Sentiment::Neutral: return "Neutral";
  }
  return "?";
}

std::optional<Sentiment> parse_sentiment_word(std::string_view word) noexcept {
  for (auto s : {Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral}) {
    if (iequals(word, to_string(s))) return s;
  }
  return std::nullopt;
}

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::ZeroShot: return "ZeroShot";
    case Strategy::FewShot: return "FewShot";
    case Strategy::CoT: return "CoT";
    case Strategy::DKCoT: return "DKCoT";
    case Strategy::ADFCoT: return "ADFCoT";
  }
  return "?";
}

std::string_view display_name(Strategy s) noexcept {
  switch (s) {
    case Strategy::ZeroShot: return "Zero-Shot";
    case Strategy::FewShot: return "Few-Shot";
    case Strategy::CoT: return "CoT";
    case Strategy::DKCoT: return "DK-CoT";
    case Strategy::ADFCoT: return "AD-FCoT";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) noexcept {
  for (auto s : kAllStrategies) {
    if (iequals(name, to_string(s)) || iequals(name, display_name(s))) return s;
  }
  return std::nullopt;
}

}  // namespace fsbench
