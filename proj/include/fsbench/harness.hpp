#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsbench/corpus.hpp"
#include "fsbench/evalkit.hpp"
#include "fsbench/gateway.hpp"
#include "fsbench/prompt.hpp"
#include "fsbench/sentiment.hpp"

namespace fsbench {

struct SelfConsistencyConfig {
  bool enabled = false;
  int n = 5;
  double temperature = 0.7;  // applies to the sampled runs only
};

struct RagConfig {
  bool enabled = false;
  std::size_t k = 3;
  std::size_t snippet_chars = 240;
};

struct ProviderConfig {
  std::string kind = "stub";  // "stub" or "openai-compatible"
  std::filesystem::path rulebook;
  std::string base_url;
  std::string api_key_env = "OPENAI_API_KEY";
  std::size_t max_in_flight = 4;
  int timeout_ms = 60000;
};

struct ExperimentConfig {
  std::filesystem::path base_dir;  // relative paths in the file resolve against this

  std::filesystem::path news_path;
  std::optional<NewsFormat> news_format;  // inferred from the extension when absent
  ColumnMap column_map;
  std::filesystem::path prices_path;
  std::filesystem::path exemplars_path;
  std::optional<std::filesystem::path> knowledge_path;
  std::map<Strategy, std::filesystem::path> template_paths;

  std::optional<Timestamp> cutoff;  // mandatory; optional only so a missing value is detectable
  LabelOptions labels;
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::vector<Sentiment> exemplar_order{kAnalogyOrder.begin(), kAnalogyOrder.end()};

  SelfConsistencyConfig self_consistency;
  RagConfig rag;
  ProviderConfig provider;
  GenerationParams generation{"stub-model", 0.0, 256, std::nullopt, std::nullopt};

  std::size_t budget = 1024;
  ScoringMode scoring_mode = ScoringMode::NeutralAsNegativeSignal;
  UnparseablePolicy unparseable = UnparseablePolicy::AsNeutral;
  std::filesystem::path output_dir;
  std::optional<std::filesystem::path> cache_path;  // defaults to <output_dir>/cache.jsonl
  std::size_t workers = 4;
  std::uint64_t seed = 0;  // fixture generation only

  std::filesystem::path effective_cache_path() const;
};

// Throws Errc::config for anything invalid, including a missing cutoff.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Canonical form: compact, key-sorted, paths relative to base_dir.
nlohmann::json to_json(const ExperimentConfig& config);
std::string config_digest(const ExperimentConfig& config);

struct StrategyResult {
  Strategy strategy = Strategy::ZeroShot;
  std::string predictions_file;  // relative to the output directory
  std::string prompts_file;
  std::size_t items = 0;
  std::optional<MetricsReport> metrics;  // nullopt when nothing could be scored
};

struct RunManifest {
  std::string config_digest;
  std::map<std::string, std::string> corpus_digests;
  std::vector<StrategyResult> strategies;
  Timestamp started_at;
  Timestamp finished_at;
  std::size_t provider_calls = 0;
  std::size_t cache_hits = 0;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);
RunManifest load_manifest(const std::filesystem::path& path);

struct RunOptions {
  bool offline = false;
  std::vector<Strategy> only;  // empty: every configured strategy
  std::shared_ptr<Provider> provider;  // overrides the configured provider
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Everything a run reads, loaded and validated once.
struct LoadedInputs {
  NewsLoadResult news;
  PriceTable prices;
  std::vector<LabeledArticle> labeled;
  SplitCorpus split;
  std::vector<Exemplar> exemplars;
  KnowledgeBase knowledge;
  TemplateSet templates;
};

LoadedInputs load_inputs(const ExperimentConfig& config);

// Prompts for every evaluable test article, ordered by article id. Errors carry
// the strategy and article id.
std::vector<PromptBundle> build_prompts(const ExperimentConfig& config, const LoadedInputs& inputs, Strategy strategy);

// Writes into config.output_dir:
//   config.json, rejections.jsonl, cache.jsonl,
//   prompts_<Strategy>.jsonl, predictions_<Strategy>.jsonl (ordered by article id),
//   report.txt, report.json, and manifest.json last.
RunManifest run(const ExperimentConfig& config, const RunOptions& options = {});

struct Report {
  std::string text;
  nlohmann::json json;
};

// Rows ordered Zero-Shot, Few-Shot, CoT, DK-CoT, AD-FCoT; percentages with two
// decimals; undefined metrics as an em dash.
Report report(std::span<const RunManifest> manifests);

struct LeakageViolation {
  std::string kind;  // test_before_cutoff | future_exemplar | future_snippet | dev_article_as_target
  std::string id;
  std::string target_id;

  friend bool operator==(const LeakageViolation&, const LeakageViolation&) = default;
};

struct AuditReport {
  std::vector<LeakageViolation> violations;
  std::size_t bundles_checked = 0;

  bool passed() const noexcept { return violations.empty(); }
};

AuditReport audit_leakage(Timestamp cutoff, const SplitCorpus& split, std::span<const PromptBundle> bundles);
AuditReport audit_leakage(const ExperimentConfig& config, const SplitCorpus& split,
                          std::span<const PromptBundle> bundles);

void to_json(nlohmann::json& j, const AuditReport& r);

std::vector<PromptBundle> load_prompt_bundles(const std::filesystem::path& jsonl);

}  // namespace fsbench
