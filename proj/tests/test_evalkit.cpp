#include <doctest.h>

#include <cmath>
#include <random>

#include "fsbench/evalkit.hpp"

using namespace fsbench;
using S = Sentiment;

namespace {

PredictionRecord pred(const std::string& id, std::optional<S> s) {
  PredictionRecord r;
  r.article_id = id;
  r.sentiment = s;
  r.parse_method = s ? ParseMethod::FinalAnswerLine : ParseMethod::Unparseable;
  return r;
}

}  // namespace

TEST_CASE("score maps the four cases") {
  const std::vector<PredictionRecord> p{pred("1", S::Positive), pred("2", S::Negative), pred("3", S::Positive),
                                        pred("4", S::Negative)};
  const LabelMap labels{{"1", Direction::Up}, {"2", Direction::Down}, {"3", Direction::Down}, {"4", Direction::Up}};
  const auto r = score(p, labels);
  CHECK(r.counts == ConfusionCounts{1, 1, 1, 1});
}

TEST_CASE("perfect predictions") {
  std::vector<PredictionRecord> p;
  LabelMap labels;
  for (int i = 0; i < 10; ++i) {
    const bool up = i % 3 == 0;
    p.push_back(pred(std::to_string(i), up ? S::Positive : S::Negative));
    labels[std::to_string(i)] = up ? Direction::Up : Direction::Down;
  }
  CHECK(metrics(score(p, labels).counts).accuracy == 1.0);
}

TEST_CASE("neutral and unparseable handling") {
  const std::vector<PredictionRecord> p{pred("1", S::Neutral), pred("2", S::Neutral), pred("3", std::nullopt),
                                        pred("4", S::Positive), pred("5", S::Positive)};
  const LabelMap labels{{"1", Direction::Up},
                        {"2", Direction::Down},
                        {"3", Direction::Up},
                        {"4", Direction::Up},
                        {"5", Direction::Flat}};

  const auto dflt = score(p, labels);
  CHECK(dflt.counts == ConfusionCounts{1, 0, 1, 2});  // tp, fp, tn, fn
  CHECK(dflt.excluded_flat == 1);
  CHECK(dflt.unparseable == 1);

  const auto dropped = score(p, labels, ScoringMode::NeutralExcluded);
  CHECK(dropped.counts == ConfusionCounts{1, 0, 0, 0});
  CHECK(dropped.excluded_neutral == 2);
  CHECK(dropped.excluded_unparseable == 1);

  const auto excl = score(p, labels, ScoringMode::NeutralAsNegativeSignal, UnparseablePolicy::Exclude);
  CHECK(excl.counts == ConfusionCounts{1, 0, 1, 1});
  CHECK(excl.excluded_unparseable == 1);

  CHECK_THROWS_AS(score(std::vector{pred("missing", S::Positive)}, labels), Error);
  CHECK(parse_scoring_mode("neutral-excluded") == ScoringMode::NeutralExcluded);
  CHECK_THROWS_AS(parse_scoring_mode("lenient"), Error);
}

TEST_CASE("metrics") {
  const auto m = metrics({3, 1, 4, 2});
  CHECK(m.accuracy == doctest::Approx(0.7));
  CHECK(*m.precision == doctest::Approx(0.75));
  CHECK(*m.recall == doctest::Approx(0.6));

  const auto none = metrics({0, 0, 5, 2});
  CHECK_FALSE(none.precision.has_value());
  CHECK(*none.recall == 0.0);
  CHECK_FALSE(metrics({0, 3, 4, 0}).recall.has_value());
  try {
    metrics({});
    FAIL("expected zero_items");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::zero_items);
  }
}

TEST_CASE("metrics agree with direct substitution on random counts") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> d(0, 50);
  for (int i = 0; i < 1000; ++i) {
    const ConfusionCounts c{d(rng), d(rng), d(rng), d(rng)};
    if (c.total() == 0) continue;
    const auto m = metrics(c);
    const double total = static_cast<double>(c.tp + c.fp + c.tn + c.fn);
    CHECK(m.accuracy == static_cast<double>(c.tp + c.tn) / total);
    if (c.tp + c.fp) CHECK(*m.precision == static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp));
    if (c.tp + c.fn) CHECK(*m.recall == static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn));
  }
}

TEST_CASE("mutual information") {
  using V = std::vector<std::string>;
  const auto indep = mutual_information(V{"a", "a", "b", "b"}, V{"u", "d", "u", "d"});
  CHECK(std::abs(indep.bits) <= 1e-12);
  const auto perfect = mutual_information(V{"a", "a", "b", "b"}, V{"u", "u", "d", "d"});
  CHECK(perfect.bits == doctest::Approx(1.0).epsilon(1e-12));

  // {(P,Up):3,(P,Down):1,(N,Up):1,(N,Down):3}, every marginal 1/2:
  //   2 * 3/8 * log2(3/2) + 2 * 1/8 * log2(1/2) = 0.75 * log2(1.5) - 0.25
  const double by_hand = 0.75 * std::log2(1.5) - 0.25;
  CHECK(by_hand == doctest::Approx(0.18872187554086717).epsilon(1e-15));
  const auto mi = mutual_information_from_counts({{3, 1}, {1, 3}});
  CHECK(std::abs(mi.bits - by_hand) <= 1e-12);
  CHECK(std::abs(mi.h_y - mi.h_y_given_x - mi.bits) <= 1e-12);
  CHECK(mi.h_x == doctest::Approx(1.0));

  CHECK_THROWS_AS(mutual_information(V{"a"}, V{"u", "d"}), Error);
  CHECK_THROWS_AS(mutual_information(V{}, V{}), Error);
}

TEST_CASE("mutual information is label-invariant and symmetric") {
  std::mt19937_64 rng(9);
  for (int round = 0; round < 200; ++round) {
    std::uniform_int_distribution<int> kx(1, 4), ky(1, 3);
    const int nx = kx(rng), ny = ky(rng);
    std::uniform_int_distribution<int> dx(0, nx - 1), dy(0, ny - 1), len(1, 60);
    std::vector<int> x, y;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      x.push_back(dx(rng));
      y.push_back(dy(rng));
    }
    const auto a = mutual_information(x, y);
    const auto b = mutual_information(y, x);
    CHECK(a.bits == b.bits);
    CHECK(a.bits >= 0.0);
    CHECK(a.bits <= std::min(a.h_x, a.h_y) + 1e-9);
    std::vector<int> relabeled;
    for (int v : x) relabeled.push_back((v * 7 + 3) % 11);  // injective on 0..3
    CHECK(std::abs(mutual_information(relabeled, y).bits - a.bits) <= 1e-12);
  }
}

TEST_CASE("evaluate bundles counts, metrics and MI") {
  const std::vector<PredictionRecord> p{pred("1", S::Positive), pred("2", S::Positive), pred("3", S::Negative),
                                        pred("4", S::Negative)};
  const LabelMap labels{{"1", Direction::Up}, {"2", Direction::Up}, {"3", Direction::Down}, {"4", Direction::Down}};
  const auto r = evaluate(p, labels);
  CHECK(r.metrics.accuracy == 1.0);
  CHECK(r.mutual_information_bits == doctest::Approx(1.0));
  const auto back = nlohmann::json(r).get<MetricsReport>();
  CHECK(back.score == r.score);
  CHECK(back.metrics.accuracy == r.metrics.accuracy);
  CHECK(*back.metrics.precision == *r.metrics.precision);
}
