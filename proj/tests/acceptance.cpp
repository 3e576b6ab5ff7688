// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "fsbench/csv.hpp"
#include "support.hpp"

using namespace fsbench;
using json = nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Collects the first few failure messages of one criterion.
struct Verdict {
  std::vector<std::string> failures;
  std::string note;

  void check(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
  }
  bool passed() const { return failures.empty(); }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 1 ---------------------------------------------------------------------------

Verdict metrics_oracle() {
  Verdict v;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> size_dist(1, 10000);
  std::uniform_int_distribution<int> pick(0, 2);
  std::uniform_int_distribution<int> coin(0, 1);
  std::size_t items = 0;
  for (int round = 0; round < 1000; ++round) {
    const int n = size_dist(rng);
    std::vector<PredictionRecord> preds(static_cast<std::size_t>(n));
    LabelMap labels;
    labels.reserve(static_cast<std::size_t>(n));
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (int i = 0; i < n; ++i) {
      auto& p = preds[static_cast<std::size_t>(i)];
      p.article_id = std::to_string(i);
      const int s = pick(rng);
      p.sentiment = s == 0 ? Sentiment::Positive : s == 1 ? Sentiment::Negative : Sentiment::Neutral;
      const bool up = coin(rng) == 1;
      labels.emplace(p.article_id, up ? Direction::Up : Direction::Down);
      // Per-item oracle: a Neutral call counts as "not Positive".
      const bool called_up = s == 0;
      if (called_up && up) ++tp;
      if (called_up && !up) ++fp;
      if (!called_up && !up) ++tn;
      if (!called_up && up) ++fn;
    }
    items += static_cast<std::size_t>(n);
    const auto counts = score(preds, labels).counts;
    v.check(counts.tp == tp && counts.fp == fp && counts.tn == tn && counts.fn == fn,
            "counts differ in round " + std::to_string(round));
    const auto m = metrics(counts);
    const double total = static_cast<double>(tp + fp + tn + fn);
    v.check(m.accuracy == static_cast<double>(tp + tn) / total, "accuracy differs");
    v.check(tp + fp == 0 ? !m.precision.has_value()
                         : m.precision && *m.precision == static_cast<double>(tp) / static_cast<double>(tp + fp),
            "precision differs");
    v.check(tp + fn == 0 ? !m.recall.has_value()
                         : m.recall && *m.recall == static_cast<double>(tp) / static_cast<double>(tp + fn),
            "recall differs");
  }
  const double secs = seconds_since(t0);
  v.check(secs < 10.0, "took " + std::to_string(secs) + " s");
  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 sets, %zu items, %.2f s", items, secs);
  v.note = buf;
  return v;
}

// 2 ---------------------------------------------------------------------------

Verdict mutual_information_properties() {
  Verdict v;
  std::mt19937_64 rng(2);

  // Exactly independent samples: every (x, y) pair repeated equally often.
  for (int nx = 1; nx <= 4; ++nx) {
    for (int ny = 1; ny <= 4; ++ny) {
      std::vector<int> x, y;
      for (int rep = 0; rep < 3; ++rep) {
        for (int a = 0; a < nx; ++a) {
          for (int b = 0; b < ny; ++b) {
            x.push_back(a);
            y.push_back(b);
          }
        }
      }
      v.check(std::abs(mutual_information(x, y).bits) <= 1e-9, "independent inputs give non-zero MI");
    }
  }
  // Product-form count tables are independent as well.
  std::uniform_int_distribution<std::size_t> small(1, 9);
  for (int i = 0; i < 100; ++i) {
    const std::vector<std::size_t> r{small(rng), small(rng), small(rng)}, c{small(rng), small(rng)};
    std::vector<std::vector<std::size_t>> joint(3, std::vector<std::size_t>(2));
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 2; ++b) joint[a][b] = r[a] * c[b];
    }
    v.check(std::abs(mutual_information_from_counts(joint).bits) <= 1e-9, "product table gives non-zero MI");
  }

  const std::vector<std::string> bx{"a", "a", "b", "b"}, by{"u", "u", "d", "d"};
  v.check(std::abs(mutual_information(bx, by).bits - 1.0) <= 1e-12, "bijective binary MI is not 1 bit");
  std::vector<int> big_x, big_y;
  for (int i = 0; i < 1000; ++i) {
    big_x.push_back(i % 2);
    big_y.push_back(1 - i % 2);
  }
  v.check(std::abs(mutual_information(big_x, big_y).bits - 1.0) <= 1e-12, "bijective binary MI is not 1 bit (n=1000)");

  for (int round = 0; round < 500; ++round) {
    std::uniform_int_distribution<int> kx(1, 6), ky(1, 6), len(1, 400);
    const int nx = kx(rng), ny = ky(rng), n = len(rng);
    std::uniform_int_distribution<int> dx(0, nx - 1), dy(0, ny - 1);
    std::vector<int> x, y;
    for (int i = 0; i < n; ++i) {
      x.push_back(dx(rng));
      y.push_back(dy(rng));
    }
    const auto a = mutual_information(x, y);
    const auto b = mutual_information(y, x);
    v.check(a.bits >= 0.0, "negative MI");
    v.check(a.bits <= std::min(a.h_x, a.h_y) + 1e-9, "MI above min entropy");
    v.check(a.bits == b.bits, "MI not symmetric");
    v.check(std::abs(a.h_y - a.h_y_given_x - a.bits) <= 1e-12, "H(Y) - H(Y|X) != I");
  }
  v.note = "500 random samples";
  return v;
}

// 3 ---------------------------------------------------------------------------

const char* kWords[] = {"revenue", "recall", "merger",  "lawsuit", "dividend", "guidance", "supply", "outage",
                        "upgrade", "layoffs", "buyback", "probe",   "contract", "strike",  "launch", "loss"};

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

// Random but valid corpus: exemplars and knowledge always predate the cutoff.
json random_corpus(const fs::path& dir, std::mt19937_64& rng, Timestamp& cutoff_out) {
  const auto start = parse_timestamp("2021-01-04T00:00:00Z");
  std::uniform_int_distribution<int> day(0, 900), minute(0, 24 * 60 - 1), word(0, 15), nwords(3, 8), n_dist(12, 40);
  std::uniform_real_distribution<double> move(-0.03, 0.03);
  const char* tickers[] = {"AAA", "BBB", "CCC"};

  const int n = n_dist(rng);
  const int cut_day = std::uniform_int_distribution<int>(200, 700)(rng);
  const auto cutoff = start + std::chrono::days(cut_day) + std::chrono::minutes(minute(rng));
  cutoff_out = cutoff;

  std::ostringstream news, prices;
  news << "id,timestamp,ticker,headline,body,source\n";
  prices << "ticker,date,open,close\n";
  std::set<std::pair<std::string, std::string>> bars;
  std::vector<std::pair<std::string, Timestamp>> dev;
  for (int i = 0; i < n; ++i) {
    // Force at least three articles per side.
    int d = day(rng);
    if (i < 3) d = std::uniform_int_distribution<int>(0, cut_day - 1)(rng);
    if (i >= 3 && i < 6) d = std::uniform_int_distribution<int>(cut_day + 1, 900)(rng);
    const auto ts = start + std::chrono::days(d) + std::chrono::minutes(minute(rng));
    const std::string ticker = tickers[i % 3];
    std::string headline = ticker;
    for (int w = nwords(rng); w > 0; --w) headline += std::string(" ") + kWords[word(rng)];
    const std::string id = "n" + std::to_string(i);
    news << id << "," << format_timestamp(ts) << "," << ticker << "," << csv::escape(headline) << ",,fuzz\n";
    const auto date = format_date(calendar_date(ts));
    if (bars.emplace(ticker, date).second) {
      prices << ticker << "," << date << ",100," << 100 * (1 + move(rng)) << "\n";
    }
    if (ts < cutoff) dev.emplace_back(id, ts);
  }
  write(dir / "news.csv", news.str());
  write(dir / "prices.csv", prices.str());

  std::ostringstream ex;
  for (std::size_t i = 0; i < std::max<std::size_t>(dev.size(), 2); ++i) {
    const auto& [id, ts] = dev[i % dev.size()];
    json e{{"source_article_id", id + "-" + std::to_string(i)},
           {"excerpt", std::string(kWords[word(rng)]) + " " + kWords[word(rng)]},
           {"rationale", {"a step"}},
           {"label", i % 2 ? "Positive" : "Negative"},
           {"timestamp", format_timestamp(ts)}};
    ex << e.dump() << "\n";
  }
  write(dir / "exemplars.jsonl", ex.str());
  std::ostringstream kb;
  for (const char* t : tickers) {
    kb << json{{"ticker", t}, {"facts", {std::string(t) + " is a company."}}, {"as_of", "2021-01-01T00:00:00Z"}}.dump()
       << "\n";
  }
  write(dir / "knowledge.jsonl", kb.str());
  write(dir / "rules.json", R"({"rules":[{"pattern":"recall","completion":"Final answer: Negative"}],"fallback":"Positive"})");

  return json{{"news", "news.csv"},
              {"prices", "prices.csv"},
              {"exemplars", "exemplars.jsonl"},
              {"knowledge", "knowledge.jsonl"},
              {"cutoff", format_timestamp(cutoff)},
              {"provider", {{"kind", "stub"}, {"rulebook", "rules.json"}}},
              {"rag", {{"enabled", std::uniform_int_distribution<int>(0, 1)(rng) == 1}, {"k", 2}}},
              {"output_dir", "out"},
              {"workers", 2}};
}

Verdict leakage_fuzzing() {
  Verdict v;
  std::mt19937_64 rng(3);
  std::size_t bundles_total = 0;
  for (int round = 0; round < 100; ++round) {
    testing::TempDir tmp("fsbench-fuzz");
    Timestamp cutoff;
    const auto cfg_json = random_corpus(tmp.path(), rng, cutoff);
    const auto config = parse_config(cfg_json, tmp.path());
    const auto in = load_inputs(config);
    for (const auto& t : in.split.test) v.check(t.article.timestamp >= cutoff, "test article before cutoff");
    for (const auto& d : in.split.dev) v.check(d.article.timestamp < cutoff, "dev article at or after cutoff");

    try {
      run(config);
    } catch (const Error& e) {
      // Corpora whose test side has no evaluable article cannot be scored; that is not a leak.
      if (e.code() != Errc::empty_split) v.check(false, std::string("run failed: ") + e.what());
      continue;
    }
    std::vector<PromptBundle> bundles;
    for (const auto s : kAllStrategies) {
      auto b = load_prompt_bundles(config.output_dir / ("prompts_" + std::string(to_string(s)) + ".jsonl"));
      bundles.insert(bundles.end(), b.begin(), b.end());
    }
    bundles_total += bundles.size();
    const auto audit = audit_leakage(config, in.split, bundles);
    v.check(audit.passed(), "violation on a harness-produced run (round " + std::to_string(round) + ")");

    // Plant a single future-dated exemplar.
    auto it = std::find_if(bundles.begin(), bundles.end(), [](const PromptBundle& b) { return !b.exemplars.empty(); });
    if (it == bundles.end()) continue;
    std::uniform_int_distribution<std::size_t> which(0, it->exemplars.size() - 1);
    auto& ref = it->exemplars[which(rng)];
    ref.id = "planted-" + std::to_string(round);
    ref.timestamp = it->target_timestamp + std::chrono::seconds(std::uniform_int_distribution<int>(0, 86400)(rng));
    const auto caught = audit_leakage(config, in.split, bundles);
    v.check(caught.violations.size() == 1 && caught.violations[0].id == ref.id &&
                caught.violations[0].kind == "future_exemplar",
            "planted exemplar not caught exactly (round " + std::to_string(round) + ")");
  }
  v.note = "100 corpora, " + std::to_string(bundles_total) + " bundles audited";
  return v;
}

// 4 ---------------------------------------------------------------------------

Verdict golden_prompts() {
  Verdict v;
  testing::TempDir tmp;
  const auto config = testing::fixture_config(tmp.path());
  const auto in = load_inputs(config);
  std::size_t n = 0;
  for (const auto s : kAllStrategies) {
    std::string rendered;
    for (const auto& b : build_prompts(config, in, s)) {
      ++n;
      v.check(b.token_estimate < 1024, "token estimate over budget for " + b.target_article_id);
      rendered += "=== " + b.target_article_id + " ===\n" + b.text;
      if (s == Strategy::ADFCoT) {
        std::size_t sections = 0;
        for (auto p = b.text.find("### Example "); p != std::string::npos; p = b.text.find("### Example ", p + 1)) {
          ++sections;
        }
        const auto neg = b.text.find("Sentiment: Negative");
        const auto pos = b.text.find("Sentiment: Positive");
        v.check(sections == 2, "AD-FCoT prompt without exactly two exemplar sections");
        v.check(neg != std::string::npos && pos != std::string::npos && neg < pos,
                "AD-FCoT exemplars not ordered Negative then Positive");
      }
    }
    const auto golden = testing::slurp(testing::golden_dir() / (std::string(to_string(s)) + ".txt"));
    v.check(rendered == golden, std::string(to_string(s)) + " differs from its golden file");
  }
  v.note = std::to_string(n) + " prompts";
  return v;
}

// 5 ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + testing::cli_path().string() + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict offline_end_to_end() {
  Verdict v;
  testing::TempDir tmp;
  const std::string args = "run --offline --config \"" + (testing::fixture_dir() / "config.json").string() +
                           "\" --out \"" + tmp.path().string() + "\"";
  const auto t0 = Clock::now();
  v.check(run_cli(args) == 0, "first run failed");
  const double secs = seconds_since(t0);
  v.check(secs < 30.0, "first run took " + std::to_string(secs) + " s");

  v.check(testing::slurp(tmp / "report.txt") == testing::slurp(testing::fixture_dir() / "expected_report.txt"),
          "report differs from the frozen table");
  const auto expected = json::parse(testing::slurp(testing::fixture_dir() / "expected_metrics.json"));
  const auto first = load_manifest(tmp / "manifest.json");
  for (const auto& s : first.strategies) {
    const auto& e = expected.at(std::string(to_string(s.strategy)));
    const auto& c = s.metrics->score.counts;
    v.check(c.tp == e["tp"] && c.fp == e["fp"] && c.tn == e["tn"] && c.fn == e["fn"],
            std::string(to_string(s.strategy)) + " counts differ from the oracle");
  }
  v.check(first.strategies.size() == 5, "expected five metric rows");

  std::map<std::string, std::string> before;
  for (const auto& e : fs::directory_iterator(tmp.path())) {
    if (e.path().filename() != "manifest.json") before[e.path().filename()] = testing::slurp(e.path());
  }
  v.check(run_cli(args) == 0, "second run failed");
  const auto second = load_manifest(tmp / "manifest.json");
  v.check(second.provider_calls == 0, "second run called the provider");
  v.check(second.cache_hits == first.provider_calls, "cache hits differ from first-run calls");
  for (const auto& [name, content] : before) {
    v.check(testing::slurp(tmp / name) == content, name + " changed on the second run");
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.2f s, %zu calls then %zu", secs, first.provider_calls, second.provider_calls);
  v.note = buf;
  return v;
}

// 6 ---------------------------------------------------------------------------

Verdict report_fidelity() {
  Verdict v;
  const std::pair<Strategy, std::array<double, 3>> rows[] = {
      {Strategy::ZeroShot, {0.5392, 0.4495, 0.4880}}, {Strategy::FewShot, {0.5470, 0.5411, 0.5142}},
      {Strategy::CoT, {0.5181, 0.5427, 0.5020}},      {Strategy::DKCoT, {0.5209, 0.5562, 0.5345}},
      {Strategy::ADFCoT, {0.5492, 0.5745, 0.5362}}};
  RunManifest m;
  for (auto it = std::rbegin(rows); it != std::rend(rows); ++it) {  // reversed on purpose
    StrategyResult r;
    r.strategy = it->first;
    MetricsReport mr;
    mr.metrics = {it->second[0], it->second[1], it->second[2]};
    r.metrics = mr;
    m.strategies.push_back(r);
  }
  const std::string expected =
      "Method     Accuracy  Precision  Recall\n"
      "Zero-Shot     53.92      44.95   48.80\n"
      "Few-Shot      54.70      54.11   51.42\n"
      "CoT           51.81      54.27   50.20\n"
      "DK-CoT        52.09      55.62   53.45\n"
      "AD-FCoT       54.92      57.45   53.62\n";
  const auto rep = report(std::span<const RunManifest>(&m, 1));
  v.check(rep.text == expected, "table text differs:\n" + rep.text);
  v.check(rep.json["rows"].size() == 5 && rep.json["rows"][4]["method"] == "AD-FCoT" &&
              rep.json["rows"][4]["recall_pct"] == "53.62",
          "JSON rows differ");
  v.note = "5 rows";
  return v;
}

// 7 ---------------------------------------------------------------------------

Verdict vote_properties() {
  Verdict v;
  const Sentiment labels[] = {Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral};
  std::size_t sequences = 0;
  for (int n = 1; n <= 5; ++n) {
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    for (int code = 0; code < total; ++code) {
      std::vector<Sentiment> s;
      for (int i = 0, c = code; i < n; ++i, c /= 3) s.push_back(labels[c % 3]);
      ++sequences;
      const auto winner = self_consistency_vote(s);

      auto perm = s;
      std::sort(perm.begin(), perm.end());
      do {
        v.check(self_consistency_vote(perm) == winner, "vote depends on sample order");
      } while (std::next_permutation(perm.begin(), perm.end()));

      auto more = s;
      more.push_back(winner);
      v.check(self_consistency_vote(more) == winner, "duplicating the winner changed the vote");
      if (n == 1) v.check(winner == s[0], "single-sample vote is not the identity");
    }
  }
  v.note = std::to_string(sequences) + " sample sequences";
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    Verdict (*fn)();
  };
  const Criterion criteria[] = {
      {"metrics oracle", metrics_oracle},         {"mutual information", mutual_information_properties},
      {"leakage fuzzing", leakage_fuzzing},       {"golden prompts", golden_prompts},
      {"offline end-to-end", offline_end_to_end}, {"report fidelity", report_fidelity},
      {"vote properties", vote_properties},
  };
  int failed = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    Verdict v;
    try {
      v = c.fn();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    std::cout << "[" << (v.passed() ? "PASS" : "FAIL") << "] " << index << ". " << c.name;
    if (!v.note.empty()) std::cout << " (" << v.note << ")";
    std::cout << "\n";
    for (const auto& f : v.failures) std::cout << "       " << f << "\n";
    if (!v.passed()) ++failed;
  }
  std::cout << (failed == 0 ? "all acceptance criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
