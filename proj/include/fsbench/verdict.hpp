#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "fsbench/error.hpp"
#include "fsbench/sentiment.hpp"

namespace fsbench {

enum class ParseMethod { FinalAnswerLine, LastKeyword, Unparseable };

std::string_view to_string(ParseMethod m) noexcept;

struct ParsedCompletion {
  std::optional<Sentiment> sentiment;  // set iff method != Unparseable
  std::string rationale;
  ParseMethod method = ParseMethod::Unparseable;
};

// Rule cascade:
//   1. the last line holding "Final answer: <label>" (case-insensitive);
//   2. otherwise the last standalone Positive/Negative/Neutral word;
//   3. otherwise Unparseable.
// The rationale is the trimmed text before the matched region.
ParsedCompletion parse_sentiment(std::string_view completion);

// Plurality vote; any tie for first place resolves to Neutral.
// Throws Errc::empty_input on an empty list.
Sentiment self_consistency_vote(std::span<const Sentiment> samples);

struct SampleVote {
  std::optional<Sentiment> sentiment;  // nullopt when every sample was unparseable
  std::size_t samples_used = 0;        // parsed samples that took part in the vote
  std::size_t chosen_sample = 0;       // sample whose rationale represents the vote
};

// Drops unparseable samples, then votes. Throws Errc::empty_input on an empty list.
SampleVote aggregate_samples(std::span<const ParsedCompletion> samples);

struct PredictionRecord {
  std::string article_id;
  Strategy strategy = Strategy::ZeroShot;
  std::optional<Sentiment> sentiment;
  std::string rationale;
  std::string raw_completion;
  ParseMethod parse_method = ParseMethod::Unparseable;
  std::size_t samples_used = 1;
};

void to_json(nlohmann::json& j, const PredictionRecord& r);
void from_json(const nlohmann::json& j, PredictionRecord& r);

}  // namespace fsbench
