#include "fsbench/evalkit.hpp"

#include <algorithm>
#include <cmath>

namespace fsbench {

std::string_view to_string(ScoringMode m) noexcept {
  return m == ScoringMode::NeutralAsNegativeSignal ? "neutral-as-negative-signal" : "neutral-excluded";
}

ScoringMode parse_scoring_mode(std::string_view name) {
  if (name == "neutral-as-negative-signal") return ScoringMode::NeutralAsNegativeSignal;
  if (name == "neutral-excluded") return ScoringMode::NeutralExcluded;
  throw Error(Errc::config, "unknown scoring mode '" + std::string(name) + "'");
}

std::string_view to_string(UnparseablePolicy p) noexcept {
  return p == UnparseablePolicy::AsNeutral ? "neutral" : "exclude";
}

UnparseablePolicy parse_unparseable_policy(std::string_view name) {
  if (name == "neutral") return UnparseablePolicy::AsNeutral;
  if (name == "exclude") return UnparseablePolicy::Exclude;
  throw Error(Errc::config, "unknown unparseable policy '" + std::string(name) + "'");
}

ScoreResult score(std::span<const PredictionRecord> predictions, const LabelMap& labels, ScoringMode mode,
                  UnparseablePolicy policy) {
  ScoreResult r;
  for (const auto& p : predictions) {
    const auto it = labels.find(p.article_id);
    if (it == labels.end()) throw Error(Errc::unmatched_id, "no label for article " + p.article_id);
    if (it->second == Direction::Flat) {
      ++r.excluded_flat;
      continue;
    }
    std::optional<Sentiment> call = p.sentiment;
    if (!call) {
      ++r.unparseable;
      if (policy == UnparseablePolicy::Exclude) {
        ++r.excluded_unparseable;
        continue;
      }
      call = Sentiment::Neutral;
    }
    if (*call == Sentiment::Neutral) {
      if (mode == ScoringMode::NeutralExcluded) {
        ++(p.sentiment ? r.excluded_neutral : r.excluded_unparseable);
        continue;
      }
      call = Sentiment::Negative;
    }
    const bool up = it->second == Direction::Up;
    if (*call == Sentiment::Positive) {
      ++(up ? r.counts.tp : r.counts.fp);
    } else {
      ++(up ? r.counts.fn : r.counts.tn);
    }
  }
  return r;
}

Metrics metrics(const ConfusionCounts& c) {
  const auto total = c.total();
  if (total == 0) throw Error(Errc::zero_items, "zero scored items");
  Metrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(total);
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return m;
}

MutualInformation mutual_information_from_counts(const std::vector<std::vector<std::size_t>>& joint) {
  std::vector<double> rows(joint.size(), 0.0);
  std::vector<double> cols;
  double n = 0.0;
  for (std::size_t x = 0; x < joint.size(); ++x) {
    if (cols.size() < joint[x].size()) cols.resize(joint[x].size(), 0.0);
    for (std::size_t y = 0; y < joint[x].size(); ++y) {
      const auto c = static_cast<double>(joint[x][y]);
      rows[x] += c;
      cols[y] += c;
      n += c;
    }
  }
  if (n == 0.0) throw Error(Errc::empty_input, "mutual information of an empty table");

  auto entropy = [n](const std::vector<double>& marginal) {
    std::vector<double> terms;
    for (double m : marginal) {
      if (m > 0.0) terms.push_back(-(m / n) * std::log2(m / n));
    }
    std::sort(terms.begin(), terms.end());
    double h = 0.0;
    for (double t : terms) h += t;
    return h;
  };

  std::vector<double> mi_terms;
  std::vector<double> cond_terms;
  for (std::size_t x = 0; x < joint.size(); ++x) {
    for (std::size_t y = 0; y < joint[x].size(); ++y) {
      const auto c = static_cast<double>(joint[x][y]);
      if (c == 0.0) continue;
      mi_terms.push_back((c / n) * std::log2((c * n) / (rows[x] * cols[y])));
      cond_terms.push_back(-(c / n) * std::log2(c / rows[x]));
    }
  }
  std::sort(mi_terms.begin(), mi_terms.end());
  std::sort(cond_terms.begin(), cond_terms.end());

  MutualInformation out;
  for (double t : mi_terms) out.bits += t;
  for (double t : cond_terms) out.h_y_given_x += t;
  out.bits = std::max(out.bits, 0.0);
  out.h_x = entropy(rows);
  out.h_y = entropy(cols);
  return out;
}

MetricsReport evaluate(std::span<const PredictionRecord> predictions, const LabelMap& labels, ScoringMode mode,
                       UnparseablePolicy policy) {
  MetricsReport r;
  r.score = score(predictions, labels, mode, policy);
  r.metrics = metrics(r.score.counts);
  const auto& c = r.score.counts;
  r.mutual_information_bits = mutual_information_from_counts({{c.tp, c.fp}, {c.fn, c.tn}}).bits;
  return r;
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  const auto& c = r.score.counts;
  j = nlohmann::json{{"accuracy", r.metrics.accuracy},
                     {"precision", opt(r.metrics.precision)},
                     {"recall", opt(r.metrics.recall)},
                     {"counts", {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}},
                     {"excluded_flat", r.score.excluded_flat},
                     {"excluded_neutral", r.score.excluded_neutral},
                     {"excluded_unparseable", r.score.excluded_unparseable},
                     {"unparseable", r.score.unparseable},
                     {"mutual_information_bits", r.mutual_information_bits}};
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  auto opt = [&](const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
  };
  r.metrics.accuracy = j.at("accuracy").get<double>();
  r.metrics.precision = opt("precision");
  r.metrics.recall = opt("recall");
  if (auto it = j.find("counts"); it != j.end()) {
    r.score.counts = {it->value("tp", std::size_t{0}), it->value("fp", std::size_t{0}),
                      it->value("tn", std::size_t{0}), it->value("fn", std::size_t{0})};
  }
  r.score.excluded_flat = j.value("excluded_flat", std::size_t{0});
  r.score.excluded_neutral = j.value("excluded_neutral", std::size_t{0});
  r.score.excluded_unparseable = j.value("excluded_unparseable", std::size_t{0});
  r.score.unparseable = j.value("unparseable", std::size_t{0});
  r.mutual_information_bits = j.value("mutual_information_bits", 0.0);
}

}  // namespace fsbench
