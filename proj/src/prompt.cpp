#include "fsbench/prompt.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <utility>

#include "fsbench/digest.hpp"
#include "fsbench/error.hpp"

namespace fsbench {
namespace {

constexpr std::string_view kZeroShotTemplate =
    "You are a financial analyst. Read the news below and classify its sentiment toward the company's stock.\n"
    "Answer with exactly one word: Positive, Negative, or Neutral.\n"
    "\n"
    "{{article}}\n"
    "\n"
    "Sentiment:\n";

constexpr std::string_view kFewShotTemplate =
    "You are a financial analyst. Read the news below and classify its sentiment toward the company's stock.\n"
    "Answer with exactly one word: Positive, Negative, or Neutral.\n"
    "\n"
    "Here are labeled examples of past news:\n"
    "\n"
    "{{exemplars}}\n"
    "\n"
    "{{article}}\n"
    "\n"
    "Sentiment:\n";

constexpr std::string_view kCotTemplate =
    "You are a financial analyst. Read the news below and determine its sentiment toward the company's stock: "
    "Positive, Negative, or Neutral.\n"
    "\n"
    "{{cue}}\n"
    "\n"
    "{{article}}\n"
    "\n";

constexpr std::string_view kDkCotTemplate =
    "You are a financial analyst. Read the news below and determine its sentiment toward the company's stock: "
    "Positive, Negative, or Neutral.\n"
    "\n"
    "{{knowledge}}\n"
    "\n"
    "{{cue}}\n"
    "\n"
    "{{article}}\n"
    "\n";

constexpr std::string_view kAdFcotTemplate =
    "You are a financial analyst. Read the news and reason step-by-step about its impact on the company's stock, "
    "then output Positive/Negative/Neutral.\n"
    "\n"
    "The following historical cases show how similar events affected market sentiment:\n"
    "\n"
    "{{exemplars}}\n"
    "\n"
    "{{cue}}\n"
    "\n"
    "{{article}}\n"
    "\n";

using Values = std::map<std::string, std::string, std::less<>>;

void require_placeholder(const PromptTemplate& tmpl, std::string_view name, std::string_view builder) {
  if (!tmpl.has_placeholder(name)) {
    throw Error(Errc::precondition,
                std::string(builder) + " template lacks the {{" + std::string(name) + "}} placeholder");
  }
}

std::string render_target(const NewsArticle& a) {
  std::string out(kTargetHeading);
  out += "\nTicker: " + a.ticker + "\nHeadline: " + a.headline;
  if (!a.body.empty()) out += "\nBody: " + a.body;
  return out;
}

std::string render_context(std::span<const RetrievedSnippet> context) {
  std::string out(kContextHeading);
  for (std::size_t i = 0; i < context.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". [" + format_date(calendar_date(context[i].timestamp)) + "] " +
           context[i].text;
  }
  return out;
}

std::string render_article_block(const NewsArticle& a, std::span<const RetrievedSnippet> context) {
  if (context.empty()) return render_target(a);
  return render_context(context) + "\n\n" + render_target(a);
}

std::string render_labeled_example(std::size_t index, const Exemplar& e) {
  return std::string(kExampleHeading) + std::to_string(index) + "\nNews: " + e.excerpt +
         "\nSentiment: " + std::string(to_string(e.label));
}

std::string render_reasoned_example(std::size_t index, const Exemplar& e) {
  std::string out = std::string(kExampleHeading) + std::to_string(index) + "\nNews: " + e.excerpt + "\nReasoning:";
  for (std::size_t i = 0; i < e.rationale.size(); ++i) {
    out += "\n" + std::to_string(i + 1) + ". " + e.rationale[i];
  }
  out += "\nSentiment: " + std::string(to_string(e.label));
  return out;
}

std::string render_knowledge(const KnowledgeBlock& k) {
  std::string out = std::string(kKnowledgeHeading) + " (" + k.ticker + ")";
  for (const auto& fact : k.facts) out += "\n- " + fact;
  return out;
}

void check_context(const NewsArticle& article, std::span<const RetrievedSnippet> context) {
  for (const auto& s : context) {
    if (s.timestamp >= article.timestamp) {
      throw Error(Errc::temporal_violation, "retrieved snippet " + s.article_id + " is not older than target " +
                                                article.id);
    }
  }
}

void check_exemplar_dates(const NewsArticle& article, std::span<const Exemplar> exemplars) {
  for (const auto& e : exemplars) {
    if (e.timestamp >= article.timestamp) {
      throw Error(Errc::temporal_violation, "exemplar " + e.source_article_id + " is not older than target " +
                                                article.id);
    }
  }
}

PromptBundle finish(Strategy strategy, const NewsArticle& article, std::string text, const PromptOptions& options,
                    std::span<const Exemplar> exemplars, std::span<const RetrievedSnippet> context) {
  PromptBundle b;
  b.strategy = strategy;
  b.token_estimate = estimate_tokens(text);
  if (b.token_estimate >= options.budget) {
    throw Error(Errc::budget_exceeded, std::string(display_name(strategy)) + " prompt for " + article.id +
                                           " needs ~" + std::to_string(b.token_estimate) +
                                           " tokens; budget is " + std::to_string(options.budget));
  }
  b.text = std::move(text);
  for (const auto& e : exemplars) b.exemplars.push_back({e.source_article_id, e.timestamp});
  for (const auto& s : context) b.retrieved.push_back({s.article_id, s.timestamp});
  b.target_article_id = article.id;
  b.target_timestamp = article.timestamp;
  return b;
}

// Indices ordered by descending score, then ascending id.
template <class IdOf>
std::vector<std::size_t> rank(const std::vector<double>& scores, IdOf id_of) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return id_of(a) < id_of(b);
  });
  return order;
}

std::vector<std::string> excerpts(std::span<const Exemplar> pool) {
  std::vector<std::string> out;
  out.reserve(pool.size());
  for (const auto& e : pool) out.push_back(e.excerpt);
  return out;
}

std::vector<std::string> article_texts(std::span<const NewsArticle> history) {
  std::vector<std::string> out;
  out.reserve(history.size());
  for (const auto& a : history) out.push_back(a.text());
  return out;
}

template <class Fn>
void for_each_jsonl(std::string_view text, std::string_view what, Fn fn) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(Errc::parse, std::string(what) + " line " + std::to_string(line_no) + ": not a JSON object");
    }
    try {
      fn(j, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse, std::string(what) + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

}  // namespace

std::vector<std::string> PromptBundle::exemplar_ids() const {
  std::vector<std::string> ids;
  for (const auto& e : exemplars) ids.push_back(e.id);
  return ids;
}

void to_json(nlohmann::json& j, const PromptBundle& b) {
  auto refs = [](const std::vector<SourceRef>& v) {
    auto arr = nlohmann::json::array();
    for (const auto& r : v) arr.push_back({{"id", r.id}, {"timestamp", format_timestamp(r.timestamp)}});
    return arr;
  };
  j = nlohmann::json{{"strategy", to_string(b.strategy)},
                     {"target_article_id", b.target_article_id},
                     {"target_timestamp", format_timestamp(b.target_timestamp)},
                     {"token_estimate", b.token_estimate},
                     {"exemplars", refs(b.exemplars)},
                     {"retrieved", refs(b.retrieved)},
                     {"knowledge_used", b.knowledge_used},
                     {"text", b.text}};
}

void from_json(const nlohmann::json& j, PromptBundle& b) {
  const auto strategy = parse_strategy(j.at("strategy").get<std::string>());
  if (!strategy) throw Error(Errc::parse, "unknown strategy in prompt bundle");
  b.strategy = *strategy;
  b.target_article_id = j.at("target_article_id").get<std::string>();
  b.target_timestamp = parse_timestamp(j.at("target_timestamp").get<std::string>());
  b.token_estimate = j.at("token_estimate").get<std::size_t>();
  b.knowledge_used = j.value("knowledge_used", false);
  b.text = j.value("text", std::string());
  auto refs = [](const nlohmann::json& arr) {
    std::vector<SourceRef> out;
    for (const auto& r : arr) {
      out.push_back({r.at("id").get<std::string>(), parse_timestamp(r.at("timestamp").get<std::string>())});
    }
    return out;
  };
  b.exemplars = refs(j.value("exemplars", nlohmann::json::array()));
  b.retrieved = refs(j.value("retrieved", nlohmann::json::array()));
}

std::size_t estimate_tokens(std::string_view text) noexcept { return (utf8_length(text) + 3) / 4; }

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
  return PromptTemplate(read_file(path));
}

bool PromptTemplate::has_placeholder(std::string_view name) const {
  return text_.find("{{" + std::string(name) + "}}") != std::string::npos;
}

std::string PromptTemplate::render(const Values& values) const {
  std::string out;
  out.reserve(text_.size() * 2);
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const auto open = text_.find("{{", pos);
    if (open == std::string::npos) break;
    const auto close = text_.find("}}", open + 2);
    if (close == std::string::npos) break;
    out.append(text_, pos, open - pos);
    const std::string_view name(text_.data() + open + 2, close - open - 2);
    if (auto it = values.find(name); it != values.end()) {
      out += it->second;
    } else {
      out.append(text_, open, close + 2 - open);
    }
    pos = close + 2;
  }
  out.append(text_, pos, std::string::npos);
  return out;
}

TemplateSet TemplateSet::defaults() {
  return TemplateSet{PromptTemplate(std::string(kZeroShotTemplate)), PromptTemplate(std::string(kFewShotTemplate)),
                     PromptTemplate(std::string(kCotTemplate) + std::string(kAnswerDirective) + "\n"),
                     PromptTemplate(std::string(kDkCotTemplate) + std::string(kAnswerDirective) + "\n"),
                     PromptTemplate(std::string(kAdFcotTemplate) + std::string(kAnswerDirective) + "\n")};
}

const PromptTemplate& TemplateSet::get(Strategy s) const {
  switch (s) {
    case Strategy::ZeroShot: return zero_shot;
    case Strategy::FewShot: return few_shot;
    case Strategy::CoT: return cot;
    case Strategy::DKCoT: return dk_cot;
    case Strategy::ADFCoT: return ad_fcot;
  }
  return zero_shot;
}

PromptTemplate& TemplateSet::get(Strategy s) {
  return const_cast<PromptTemplate&>(std::as_const(*this).get(s));
}

ExemplarPool::ExemplarPool(std::vector<Exemplar> exemplars)
    : exemplars_(std::move(exemplars)), index_(excerpts(exemplars_)) {}

std::vector<Exemplar> ExemplarPool::select(const NewsArticle& target, std::size_t k,
                                           std::span<const Sentiment> class_constraint) const {
  if (exemplars_.empty()) throw Error(Errc::empty_pool, "exemplar pool is empty");
  if (k == 0) throw Error(Errc::precondition, "k must be positive");
  check_exemplar_dates(target, exemplars_);

  const auto order = rank(index_.scores(target.text()),
                          [&](std::size_t i) -> const std::string& { return exemplars_[i].source_article_id; });

  std::vector<Exemplar> out;
  if (class_constraint.empty()) {
    if (k > exemplars_.size()) {
      throw Error(Errc::precondition, "pool holds " + std::to_string(exemplars_.size()) + " exemplars; asked for " +
                                          std::to_string(k));
    }
    for (std::size_t i = 0; i < k; ++i) out.push_back(exemplars_[order[i]]);
    return out;
  }

  if (k != class_constraint.size()) {
    throw Error(Errc::precondition, "k must equal the class constraint length");
  }
  std::vector<bool> used(exemplars_.size(), false);
  for (const Sentiment wanted : class_constraint) {
    auto it = std::find_if(order.begin(), order.end(),
                           [&](std::size_t i) { return !used[i] && exemplars_[i].label == wanted; });
    if (it == order.end()) {
      throw Error(Errc::unsatisfiable_constraint,
                  "exemplar pool has no " + std::string(to_string(wanted)) + " exemplar available");
    }
    used[*it] = true;
    out.push_back(exemplars_[*it]);
  }
  return out;
}

std::vector<Exemplar> select_exemplars(std::span<const Exemplar> pool, const NewsArticle& target, std::size_t k,
                                       std::span<const Sentiment> class_constraint) {
  return ExemplarPool(std::vector<Exemplar>(pool.begin(), pool.end())).select(target, k, class_constraint);
}

ContextRetriever::ContextRetriever(std::vector<NewsArticle> history)
    : history_(std::move(history)), index_(article_texts(history_)) {}

std::vector<RetrievedSnippet> ContextRetriever::retrieve(const NewsArticle& target, std::size_t k,
                                                         std::size_t snippet_chars) const {
  for (const auto& h : history_) {
    if (h.timestamp >= target.timestamp) {
      throw Error(Errc::temporal_violation, "history article " + h.id + " is not older than target " + target.id);
    }
  }
  const auto scores = index_.scores(target.text());
  const auto order = rank(scores, [&](std::size_t i) -> const std::string& { return history_[i].id; });
  std::vector<RetrievedSnippet> out;
  const std::size_t n = std::min(k, history_.size());
  for (std::size_t r = 0; r < n; ++r) {
    const auto& a = history_[order[r]];
    std::string text = a.body.empty() ? a.headline : a.headline + ": " + a.body;
    if (utf8_length(text) > snippet_chars) {
      if (snippet_chars > 3) {
        text = std::string(utf8_prefix(text, snippet_chars - 3)) + "...";
      } else {
        text = std::string(utf8_prefix(text, snippet_chars));
      }
    }
    out.push_back({a.id, a.timestamp, std::move(text), scores[order[r]]});
  }
  return out;
}

std::vector<RetrievedSnippet> retrieve_context(std::span<const NewsArticle> history, const NewsArticle& target,
                                               std::size_t k, std::size_t snippet_chars) {
  return ContextRetriever(std::vector<NewsArticle>(history.begin(), history.end()))
      .retrieve(target, k, snippet_chars);
}

PromptBundle build_zero_shot(const NewsArticle& article, const PromptTemplate& tmpl, const PromptOptions& options,
                             std::span<const RetrievedSnippet> context) {
  require_placeholder(tmpl, "article", "Zero-Shot");
  check_context(article, context);
  auto text = tmpl.render({{"article", render_article_block(article, context)}});
  return finish(Strategy::ZeroShot, article, std::move(text), options, {}, context);
}

PromptBundle build_few_shot(const NewsArticle& article, std::span<const Exemplar> exemplars,
                            const PromptTemplate& tmpl, const PromptOptions& options,
                            std::span<const RetrievedSnippet> context) {
  require_placeholder(tmpl, "article", "Few-Shot");
  require_placeholder(tmpl, "exemplars", "Few-Shot");
  if (exemplars.empty()) throw Error(Errc::precondition, "Few-Shot needs at least one exemplar");
  check_exemplar_dates(article, exemplars);
  check_context(article, context);

  std::string examples;
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    if (i > 0) examples += "\n\n";
    examples += render_labeled_example(i + 1, exemplars[i]);
  }
  auto text = tmpl.render({{"article", render_article_block(article, context)}, {"exemplars", examples}});
  return finish(Strategy::FewShot, article, std::move(text), options, exemplars, context);
}

PromptBundle build_cot(const NewsArticle& article, const PromptTemplate& tmpl, const PromptOptions& options,
                       std::span<const RetrievedSnippet> context) {
  require_placeholder(tmpl, "article", "CoT");
  require_placeholder(tmpl, "cue", "CoT");
  check_context(article, context);
  auto text = tmpl.render({{"article", render_article_block(article, context)}, {"cue", std::string(kStepwiseCue)}});
  return finish(Strategy::CoT, article, std::move(text), options, {}, context);
}

PromptBundle build_dk_cot(const NewsArticle& article, const KnowledgeBlock& knowledge, const PromptTemplate& tmpl,
                          const PromptOptions& options, std::span<const RetrievedSnippet> context) {
  require_placeholder(tmpl, "article", "DK-CoT");
  require_placeholder(tmpl, "cue", "DK-CoT");
  require_placeholder(tmpl, "knowledge", "DK-CoT");
  if (knowledge.ticker != article.ticker) {
    throw Error(Errc::ticker_mismatch,
                "knowledge block for " + knowledge.ticker + " used with " + article.ticker + " article " + article.id);
  }
  if (knowledge.as_of && *knowledge.as_of >= article.timestamp) {
    throw Error(Errc::temporal_violation, "knowledge for " + knowledge.ticker + " is dated at or after target " +
                                              article.id);
  }
  for (const auto& fact : knowledge.facts) {
    if (utf8_length(fact) > kMaxFactChars) {
      throw Error(Errc::precondition, "knowledge fact for " + knowledge.ticker + " exceeds " +
                                          std::to_string(kMaxFactChars) + " characters");
    }
  }
  check_context(article, context);
  auto text = tmpl.render({{"article", render_article_block(article, context)},
                           {"cue", std::string(kStepwiseCue)},
                           {"knowledge", render_knowledge(knowledge)}});
  auto bundle = finish(Strategy::DKCoT, article, std::move(text), options, {}, context);
  bundle.knowledge_used = true;
  return bundle;
}

PromptBundle render_ad_fcot(const NewsArticle& article, std::span<const Exemplar> exemplars,
                            const PromptTemplate& tmpl, const PromptOptions& options,
                            std::span<const RetrievedSnippet> context) {
  require_placeholder(tmpl, "article", "AD-FCoT");
  require_placeholder(tmpl, "exemplars", "AD-FCoT");
  require_placeholder(tmpl, "cue", "AD-FCoT");
  if (exemplars.size() != 2) throw Error(Errc::precondition, "AD-FCoT needs exactly two exemplars");
  const std::set<Sentiment> labels{exemplars[0].label, exemplars[1].label};
  if (!labels.contains(Sentiment::Negative) || !labels.contains(Sentiment::Positive)) {
    throw Error(Errc::precondition, "AD-FCoT needs one Negative and one Positive exemplar");
  }
  for (const auto& e : exemplars) {
    if (e.rationale.empty()) {
      throw Error(Errc::precondition, "AD-FCoT exemplar " + e.source_article_id + " has no rationale");
    }
  }
  check_exemplar_dates(article, exemplars);
  check_context(article, context);

  const std::string examples = render_reasoned_example(1, exemplars[0]) + "\n\n" +
                               render_reasoned_example(2, exemplars[1]);
  auto text = tmpl.render({{"article", render_article_block(article, context)},
                           {"exemplars", examples},
                           {"cue", std::string(kAnalogyCue)}});
  return finish(Strategy::ADFCoT, article, std::move(text), options, exemplars, context);
}

PromptBundle build_ad_fcot(const NewsArticle& article, const ExemplarPool& pool, const PromptTemplate& tmpl,
                           const PromptOptions& options, std::span<const Sentiment> order,
                           std::span<const RetrievedSnippet> context) {
  const auto chosen = pool.select(article, order.size(), order);
  return render_ad_fcot(article, chosen, tmpl, options, context);
}

std::vector<Exemplar> parse_exemplars(std::string_view jsonl) {
  std::vector<Exemplar> out;
  std::set<std::string> ids;
  for_each_jsonl(jsonl, "exemplar pool", [&](const nlohmann::json& j, std::size_t line) {
    Exemplar e;
    e.source_article_id = j.at("source_article_id").get<std::string>();
    e.excerpt = j.at("excerpt").get<std::string>();
    e.rationale = j.value("rationale", std::vector<std::string>{});
    const auto label = parse_sentiment_word(j.at("label").get<std::string>());
    if (!label) throw Error(Errc::parse, "exemplar pool line " + std::to_string(line) + ": bad label");
    e.label = *label;
    e.timestamp = parse_timestamp(j.at("timestamp").get<std::string>());
    if (e.excerpt.empty()) throw Error(Errc::parse, "exemplar pool line " + std::to_string(line) + ": empty excerpt");
    if (!ids.insert(e.source_article_id).second) {
      throw Error(Errc::duplicate_key, "exemplar pool line " + std::to_string(line) + ": duplicate source_article_id " +
                                           e.source_article_id);
    }
    out.push_back(std::move(e));
  });
  return out;
}

std::vector<Exemplar> load_exemplars(const std::filesystem::path& path) { return parse_exemplars(read_file(path)); }

KnowledgeBase parse_knowledge(std::string_view jsonl) {
  KnowledgeBase out;
  for_each_jsonl(jsonl, "knowledge file", [&](const nlohmann::json& j, std::size_t line) {
    KnowledgeBlock k;
    k.ticker = j.at("ticker").get<std::string>();
    k.facts = j.at("facts").get<std::vector<std::string>>();
    if (auto it = j.find("as_of"); it != j.end() && !it->is_null()) k.as_of = parse_timestamp(it->get<std::string>());
    for (const auto& f : k.facts) {
      if (utf8_length(f) > kMaxFactChars) {
        throw Error(Errc::parse, "knowledge file line " + std::to_string(line) + ": fact longer than " +
                                     std::to_string(kMaxFactChars) + " characters");
      }
    }
    const std::string ticker = k.ticker;
    if (!out.emplace(ticker, std::move(k)).second) {
      throw Error(Errc::duplicate_key, "knowledge file line " + std::to_string(line) + ": duplicate ticker " + ticker);
    }
  });
  return out;
}

KnowledgeBase load_knowledge(const std::filesystem::path& path) { return parse_knowledge(read_file(path)); }

}  // namespace fsbench
