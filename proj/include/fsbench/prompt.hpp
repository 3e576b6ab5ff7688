#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsbench/corpus.hpp"
#include "fsbench/sentiment.hpp"
#include "fsbench/text_index.hpp"
#include "fsbench/time_util.hpp"

namespace fsbench {

/// A solved historical case shown to the model: excerpt, causal steps, label.
struct Exemplar {
  std::string source_article_id;
  std::string excerpt;
  std::vector<std::string> rationale;
  Sentiment label = Sentiment::Neutral;
  Timestamp timestamp;
};

inline constexpr std::size_t kMaxFactChars = 300;

/// Background facts for one ticker. `as_of`, when present, dates the block and
/// must precede any article it is shown with.
struct KnowledgeBlock {
  std::string ticker;
  std::vector<std::string> facts;
  std::optional<Timestamp> as_of;
};

struct RetrievedSnippet {
  std::string article_id;
  Timestamp timestamp;
  std::string text;
  double score = 0.0;
};

struct SourceRef {
  std::string id;
  Timestamp timestamp;
};

struct PromptBundle {
  Strategy strategy = Strategy::ZeroShot;
  std::string text;
  std::size_t token_estimate = 0;
  std::vector<SourceRef> exemplars;  // in rendered order
  std::vector<SourceRef> retrieved;
  bool knowledge_used = false;
  std::string target_article_id;
  Timestamp target_timestamp;

  std::vector<std::string> exemplar_ids() const;
};

void to_json(nlohmann::json& j, const PromptBundle& b);
void from_json(const nlohmann::json& j, PromptBundle& b);

/// ceil(code points / 4). A tokenizer-free stand-in for subword counts, used
/// only as a prompt-length guardrail.
std::size_t estimate_tokens(std::string_view text) noexcept;

/// Plain text with {{name}} placeholders. Recognised names: article,
/// exemplars, knowledge, cue.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string text) : text_(std::move(text)) {}

  static PromptTemplate from_file(const std::filesystem::path& path);

  const std::string& text() const noexcept { return text_; }
  bool has_placeholder(std::string_view name) const;

  // Placeholders without a value are left untouched.
  std::string render(const std::map<std::string, std::string, std::less<>>& values) const;

 private:
  std::string text_;
};

struct TemplateSet {
  PromptTemplate zero_shot;
  PromptTemplate few_shot;
  PromptTemplate cot;
  PromptTemplate dk_cot;
  PromptTemplate ad_fcot;

  static TemplateSet defaults();

  const PromptTemplate& get(Strategy s) const;
  PromptTemplate& get(Strategy s);
};

inline constexpr std::string_view kStepwiseCue =
    "Think step-by-step: What events happen in the news and how might they affect the company's stock?";
inline constexpr std::string_view kAnalogyCue =
    "Reason by analogy: compare the target news with the historical cases above, trace the causal chain from "
    "the event to the company's stock step by step, and conclude with a sentiment label.";
inline constexpr std::string_view kAnswerDirective =
    "Write your reasoning as numbered steps, then end with a final line of the form \"Final answer: "
    "<Positive|Negative|Neutral>\".";

inline constexpr std::string_view kExampleHeading = "### Example ";
inline constexpr std::string_view kTargetHeading = "### Target news";
inline constexpr std::string_view kContextHeading = "### Related past news";
inline constexpr std::string_view kKnowledgeHeading = "### Background knowledge";

struct PromptOptions {
  std::size_t budget = 1024;  // token_estimate must stay strictly below this
};

inline constexpr std::array<Sentiment, 2> kAnalogyOrder = {Sentiment::Negative, Sentiment::Positive};

/// Exemplars plus a TF-IDF index over their excerpts.
class ExemplarPool {
 public:
  explicit ExemplarPool(std::vector<Exemplar> exemplars);

  std::span<const Exemplar> exemplars() const noexcept { return exemplars_; }
  std::size_t size() const noexcept { return exemplars_.size(); }

  // Ranks by cosine similarity between each excerpt and the target's
  // headline+body, ties broken by source_article_id. With a class constraint,
  // returns the best-ranked exemplar of each listed class in the listed order
  // (k must equal the constraint length).
  //
  // Throws empty_pool, temporal_violation (any exemplar not strictly older
  // than the target), unsatisfiable_constraint, or precondition.
  std::vector<Exemplar> select(const NewsArticle& target, std::size_t k,
                               std::span<const Sentiment> class_constraint = {}) const;

 private:
  std::vector<Exemplar> exemplars_;
  TfidfIndex index_;
};

std::vector<Exemplar> select_exemplars(std::span<const Exemplar> pool, const NewsArticle& target, std::size_t k,
                                       std::span<const Sentiment> class_constraint = {});

/// Similar past articles for retrieval augmentation.
class ContextRetriever {
 public:
  explicit ContextRetriever(std::vector<NewsArticle> history);

  // Top-k by TF-IDF cosine (k clamps to the history size), each snippet cut to
  // snippet_chars code points. Throws temporal_violation if any history item
  // is not strictly older than the target.
  std::vector<RetrievedSnippet> retrieve(const NewsArticle& target, std::size_t k,
                                         std::size_t snippet_chars = 240) const;

 private:
  std::vector<NewsArticle> history_;
  TfidfIndex index_;
};

std::vector<RetrievedSnippet> retrieve_context(std::span<const NewsArticle> history, const NewsArticle& target,
                                               std::size_t k, std::size_t snippet_chars = 240);

// Builders. All of them are deterministic, never truncate, and throw
// budget_exceeded when the estimate reaches options.budget. `context` is the
// optional retrieval augmentation, rendered just before the target section.

PromptBundle build_zero_shot(const NewsArticle& article, const PromptTemplate& tmpl,
                             const PromptOptions& options = {}, std::span<const RetrievedSnippet> context = {});

PromptBundle build_few_shot(const NewsArticle& article, std::span<const Exemplar> exemplars,
                            const PromptTemplate& tmpl, const PromptOptions& options = {},
                            std::span<const RetrievedSnippet> context = {});

PromptBundle build_cot(const NewsArticle& article, const PromptTemplate& tmpl, const PromptOptions& options = {},
                       std::span<const RetrievedSnippet> context = {});

PromptBundle build_dk_cot(const NewsArticle& article, const KnowledgeBlock& knowledge, const PromptTemplate& tmpl,
                          const PromptOptions& options = {}, std::span<const RetrievedSnippet> context = {});

// Renders AD-FCoT from an explicit exemplar list (each needs a rationale).
PromptBundle render_ad_fcot(const NewsArticle& article, std::span<const Exemplar> exemplars,
                            const PromptTemplate& tmpl, const PromptOptions& options = {},
                            std::span<const RetrievedSnippet> context = {});

PromptBundle build_ad_fcot(const NewsArticle& article, const ExemplarPool& pool, const PromptTemplate& tmpl,
                           const PromptOptions& options = {}, std::span<const Sentiment> order = kAnalogyOrder,
                           std::span<const RetrievedSnippet> context = {});

std::vector<Exemplar> parse_exemplars(std::string_view jsonl);
std::vector<Exemplar> load_exemplars(const std::filesystem::path& path);

using KnowledgeBase = std::map<std::string, KnowledgeBlock, std::less<>>;

KnowledgeBase parse_knowledge(std::string_view jsonl);
KnowledgeBase load_knowledge(const std::filesystem::path& path);

}  // namespace fsbench
