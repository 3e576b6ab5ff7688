#include "fsbench/verdict.hpp"

#include <algorithm>
#include <array>
#include <regex>

#include "fsbench/error.hpp"

namespace fsbench {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

const std::regex& final_answer_re() {
  static const std::regex re(R"(final\s+answer\s*:[\s*_"'`]*(positive|negative|neutral)\b)",
                             std::regex::icase | std::regex::ECMAScript);
  return re;
}

const std::regex& keyword_re() {
  static const std::regex re(R"(\b(positive|negative|neutral)\b)", std::regex::icase | std::regex::ECMAScript);
  return re;
}

}  // namespace

std::string_view to_string(ParseMethod m) noexcept {
  switch (m) {
    case ParseMethod::FinalAnswerLine: return "FinalAnswerLine";
    case ParseMethod::LastKeyword: return "LastKeyword";
    case ParseMethod::Unparseable: return "Unparseable";
  }
  return "?";
}

ParsedCompletion parse_sentiment(std::string_view completion) {
  const std::string text(completion);

  // Rule 1: last line carrying a "Final answer:" verdict.
  std::optional<std::size_t> match_pos;
  std::string label;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    auto line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    std::smatch m;
    const auto first = text.begin() + static_cast<std::ptrdiff_t>(line_start);
    const auto last = text.begin() + static_cast<std::ptrdiff_t>(line_end);
    // Within a line the last occurrence wins as well.
    for (auto it = first; std::regex_search(it, last, m, final_answer_re());) {
      match_pos = static_cast<std::size_t>(m[0].first - text.begin());
      label = m[1].str();
      it = m[0].second;
    }
    line_start = line_end + 1;
  }
  if (match_pos) {
    return {parse_sentiment_word(label), trim(std::string_view(text).substr(0, *match_pos)),
            ParseMethod::FinalAnswerLine};
  }

  // Rule 2: last standalone label word.
  std::optional<std::size_t> word_pos;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), keyword_re()); it != std::sregex_iterator(); ++it) {
    word_pos = static_cast<std::size_t>(it->position(0));
    label = (*it)[1].str();
  }
  if (word_pos) {
    return {parse_sentiment_word(label), trim(std::string_view(text).substr(0, *word_pos)),
            ParseMethod::LastKeyword};
  }

  return {std::nullopt, trim(text), ParseMethod::Unparseable};
}

Sentiment self_consistency_vote(std::span<const Sentiment> samples) {
  if (samples.empty()) throw Error(Errc::empty_input, "self-consistency vote over an empty sample list");
  std::array<std::size_t, 3> counts{};
  for (const auto s : samples) ++counts[static_cast<std::size_t>(s)];
  const auto best = *std::max_element(counts.begin(), counts.end());
  if (std::count(counts.begin(), counts.end(), best) > 1) return Sentiment::Neutral;
  return static_cast<Sentiment>(std::find(counts.begin(), counts.end(), best) - counts.begin());
}

SampleVote aggregate_samples(std::span<const ParsedCompletion> samples) {
  if (samples.empty()) throw Error(Errc::empty_input, "no samples to aggregate");
  std::vector<Sentiment> parsed;
  for (const auto& s : samples) {
    if (s.sentiment) parsed.push_back(*s.sentiment);
  }
  SampleVote vote;
  vote.samples_used = parsed.size();
  if (parsed.empty()) return vote;
  vote.sentiment = self_consistency_vote(parsed);

  std::optional<std::size_t> first_parsed;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].sentiment) continue;
    if (!first_parsed) first_parsed = i;
    if (*samples[i].sentiment == *vote.sentiment) {
      vote.chosen_sample = i;
      return vote;
    }
  }
  vote.chosen_sample = *first_parsed;
  return vote;
}

void to_json(nlohmann::json& j, const PredictionRecord& r) {
  j = nlohmann::json{{"article_id", r.article_id},
                     {"strategy", to_string(r.strategy)},
                     {"sentiment", r.sentiment ? nlohmann::json(to_string(*r.sentiment)) : nlohmann::json(nullptr)},
                     {"rationale", r.rationale},
                     {"raw_completion", r.raw_completion},
                     {"parse_method", to_string(r.parse_method)},
                     {"samples_used", r.samples_used}};
}

void from_json(const nlohmann::json& j, PredictionRecord& r) {
  r.article_id = j.at("article_id").get<std::string>();
  const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (!strategy) throw Error(Errc::parse, "unknown strategy in prediction record");
  r.strategy = *strategy;
  r.sentiment.reset();
  if (const auto& s = j.at("sentiment"); s.is_string()) r.sentiment = parse_sentiment_word(s.get<std::string>());
  r.rationale = j.value("rationale", std::string());
  r.raw_completion = j.value("raw_completion", std::string());
  const auto method = j.at("parse_method").get<std::string>();
  r.parse_method = method == "FinalAnswerLine" ? ParseMethod::FinalAnswerLine
                   : method == "LastKeyword"   ? ParseMethod::LastKeyword
                                               : ParseMethod::Unparseable;
  r.samples_used = j.value("samples_used", std::size_t{1});
}

}  // namespace fsbench
