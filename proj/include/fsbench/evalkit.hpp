#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsbench/corpus.hpp"
#include "fsbench/error.hpp"
#include "fsbench/verdict.hpp"

namespace fsbench {

// How a Neutral prediction enters the binary confusion matrix.
enum class ScoringMode {
  NeutralAsNegativeSignal,  // "neutral-as-negative-signal": scored as a Negative call
  NeutralExcluded,          // "neutral-excluded": dropped and tallied
};

std::string_view to_string(ScoringMode m) noexcept;
ScoringMode parse_scoring_mode(std::string_view name);

// How an unparseable completion enters scoring.
enum class UnparseablePolicy {
  AsNeutral,  // then handled per ScoringMode
  Exclude,
};

std::string_view to_string(UnparseablePolicy p) noexcept;
UnparseablePolicy parse_unparseable_policy(std::string_view name);

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ScoreResult {
  ConfusionCounts counts;
  std::size_t excluded_flat = 0;
  std::size_t excluded_neutral = 0;
  std::size_t excluded_unparseable = 0;
  std::size_t unparseable = 0;  // all unparseable predictions, scored or not

  friend bool operator==(const ScoreResult&, const ScoreResult&) = default;
};

using LabelMap = std::unordered_map<std::string, Direction>;

// Positive vs Up -> TP, Positive vs Down -> FP, Negative vs Down -> TN,
// Negative vs Up -> FN. Flat labels are skipped and tallied in excluded_flat.
// Throws Errc::unmatched_id for a prediction without a label.
ScoreResult score(std::span<const PredictionRecord> predictions, const LabelMap& labels,
                  ScoringMode mode = ScoringMode::NeutralAsNegativeSignal,
                  UnparseablePolicy policy = UnparseablePolicy::AsNeutral);

struct Metrics {
  double accuracy = 0.0;
  std::optional<double> precision;  // undefined when tp + fp == 0
  std::optional<double> recall;     // undefined when tp + fn == 0
};

// Throws Errc::zero_items when nothing was scored.
Metrics metrics(const ConfusionCounts& counts);

struct MutualInformation {
  double bits = 0.0;  // I(X;Y)
  double h_x = 0.0;
  double h_y = 0.0;
  double h_y_given_x = 0.0;
};

// Plug-in estimate from a joint count table (rows: X, columns: Y), log base 2.
// Cell terms are summed in sorted order so transposing the table gives a
// bit-identical result.
MutualInformation mutual_information_from_counts(const std::vector<std::vector<std::size_t>>& joint);

template <class X, class Y>
MutualInformation mutual_information(std::span<const X> signal, std::span<const Y> outcome) {
  if (signal.size() != outcome.size()) {
    throw Error(Errc::length_mismatch, "signal and outcome lengths differ");
  }
  if (signal.empty()) throw Error(Errc::empty_input, "mutual information of an empty sample");
  std::map<X, std::size_t> xs;
  std::map<Y, std::size_t> ys;
  for (const auto& x : signal) xs.emplace(x, 0);
  for (const auto& y : outcome) ys.emplace(y, 0);
  std::size_t i = 0;
  for (auto& [_, idx] : xs) idx = i++;
  i = 0;
  for (auto& [_, idx] : ys) idx = i++;
  std::vector<std::vector<std::size_t>> joint(xs.size(), std::vector<std::size_t>(ys.size(), 0));
  for (std::size_t k = 0; k < signal.size(); ++k) ++joint[xs.at(signal[k])][ys.at(outcome[k])];
  return mutual_information_from_counts(joint);
}

template <class X, class Y>
MutualInformation mutual_information(const std::vector<X>& signal, const std::vector<Y>& outcome) {
  return mutual_information(std::span<const X>(signal), std::span<const Y>(outcome));
}

struct MetricsReport {
  Metrics metrics;
  ScoreResult score;
  // Between the scored binary call (Positive vs not) and the Up/Down move.
  double mutual_information_bits = 0.0;
};

MetricsReport evaluate(std::span<const PredictionRecord> predictions, const LabelMap& labels,
                       ScoringMode mode = ScoringMode::NeutralAsNegativeSignal,
                       UnparseablePolicy policy = UnparseablePolicy::AsNeutral);

void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);

}  // namespace fsbench
