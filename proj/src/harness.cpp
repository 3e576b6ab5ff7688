#include "fsbench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_set>

#include "fsbench/digest.hpp"
#include "fsbench/text_index.hpp"

namespace fsbench {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::config, what); }

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) config_error("empty path in config");
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal();
}

std::string rel(const fs::path& p, const fs::path& base) {
  auto r = p.lexically_relative(base);
  return (r.empty() ? p : r).generic_string();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    config_error(std::string("config key '") + key + "' has the wrong type");
  }
}

Strategy strategy_or_throw(const std::string& name) {
  const auto s = parse_strategy(name);
  if (!s) config_error("unknown strategy '" + name + "'");
  return *s;
}

Sentiment sentiment_or_throw(const std::string& name) {
  const auto s = parse_sentiment_word(name);
  if (!s) config_error("unknown sentiment '" + name + "'");
  return *s;
}

std::chrono::seconds parse_time_of_day(const std::string& hhmm) {
  if (hhmm.size() != 5 || hhmm[2] != ':') config_error("market_close_utc must be HH:MM");
  const int h = std::atoi(hhmm.substr(0, 2).c_str());
  const int m = std::atoi(hhmm.substr(3, 2).c_str());
  if (h < 0 || h > 23 || m < 0 || m > 59) config_error("market_close_utc out of range");
  return std::chrono::hours{h} + std::chrono::minutes{m};
}

std::string format_time_of_day(std::chrono::seconds s) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d:%02d", static_cast<int>(s.count() / 3600),
                static_cast<int>((s.count() / 60) % 60));
  return buf;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

template <class Range>
std::string to_jsonl_text(const Range& items) {
  std::string out;
  for (const auto& item : items) out += json(item).dump() + "\n";
  return out;
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "—";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t width) {
  const auto n = utf8_length(s);
  return n >= width ? s : std::string(width - n, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  const auto n = utf8_length(s);
  return n >= width ? s : s + std::string(width - n, ' ');
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& pc) {
  if (pc.kind == "stub") return std::shared_ptr<Provider>(StubProvider::from_file(pc.rulebook));
  HttpProviderConfig hc;
  hc.base_url = pc.base_url;
  hc.timeout_ms = pc.timeout_ms;
  if (const char* key = std::getenv(pc.api_key_env.c_str())) hc.api_key = key;
  return std::make_shared<OpenAiCompatibleProvider>(std::move(hc));
}

PromptBundle build_bundle(Strategy strategy, const NewsArticle& article, const LoadedInputs& in,
                          const ExemplarPool& pool, const ExperimentConfig& config,
                          std::span<const RetrievedSnippet> context) {
  const PromptOptions options{config.budget};
  const auto& tmpl = in.templates.get(strategy);
  const std::span<const Sentiment> order(config.exemplar_order);
  switch (strategy) {
    case Strategy::ZeroShot: return build_zero_shot(article, tmpl, options, context);
    case Strategy::FewShot: {
      const auto chosen = pool.select(article, order.size(), order);
      return build_few_shot(article, chosen, tmpl, options, context);
    }
    case Strategy::CoT: return build_cot(article, tmpl, options, context);
    case Strategy::DKCoT: {
      const auto it = in.knowledge.find(article.ticker);
      const KnowledgeBlock empty{article.ticker, {}, std::nullopt};
      return build_dk_cot(article, it == in.knowledge.end() ? empty : it->second, tmpl, options, context);
    }
    case Strategy::ADFCoT: return build_ad_fcot(article, pool, tmpl, options, order, context);
  }
  throw Error(Errc::precondition, "unknown strategy");
}

Error with_context(const Error& e, Strategy s, const std::string& article_id) {
  return Error(e.code(), std::string(display_name(s)) + " / " + article_id + ": " + e.what());
}

}  // namespace

fs::path ExperimentConfig::effective_cache_path() const {
  return cache_path ? *cache_path : output_dir / "cache.jsonl";
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) config_error("config must be a JSON object");
  static const std::set<std::string> kKnown = {
      "news",      "prices",       "exemplars",   "knowledge",   "templates",  "cutoff",
      "threshold", "shift_after_close", "market_close_utc", "strategies", "exemplar_order",
      "self_consistency", "rag", "provider", "generation", "budget", "scoring_mode",
      "unparseable", "output_dir", "cache_path", "workers", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!kKnown.contains(key)) config_error("unknown config key '" + key + "'");
  }

  ExperimentConfig c;
  c.base_dir = base_dir.lexically_normal();

  // Cutoff first: look-ahead safety must be explicit before anything else is considered.
  if (!j.contains("cutoff") || j["cutoff"].is_null()) config_error("config is missing the mandatory 'cutoff'");
  try {
    c.cutoff = parse_timestamp(j["cutoff"].get<std::string>());
  } catch (const std::exception& e) {
    config_error(std::string("invalid cutoff: ") + e.what());
  }

  if (!j.contains("news")) config_error("config is missing 'news'");
  const auto& news = j["news"];
  if (news.is_string()) {
    c.news_path = resolve(c.base_dir, news.get<std::string>());
  } else if (news.is_object()) {
    c.news_path = resolve(c.base_dir, get_or<std::string>(news, "path", ""));
    if (news.contains("format")) c.news_format = parse_news_format(news["format"].get<std::string>());
    for (const auto& [canonical, source] : get_or<json>(news, "column_map", json::object()).items()) {
      if (!source.is_string()) config_error("column_map values must be strings");
      c.column_map[canonical] = source.get<std::string>();
    }
  } else {
    config_error("'news' must be a path or an object");
  }

  if (!j.contains("prices")) config_error("config is missing 'prices'");
  c.prices_path = resolve(c.base_dir, get_or<std::string>(j, "prices", ""));
  if (!j.contains("exemplars")) config_error("config is missing 'exemplars'");
  c.exemplars_path = resolve(c.base_dir, get_or<std::string>(j, "exemplars", ""));
  if (j.contains("knowledge") && !j["knowledge"].is_null()) {
    c.knowledge_path = resolve(c.base_dir, get_or<std::string>(j, "knowledge", ""));
  }
  for (const auto& [name, path] : get_or<json>(j, "templates", json::object()).items()) {
    c.template_paths[strategy_or_throw(name)] = resolve(c.base_dir, path.get<std::string>());
  }

  c.labels.threshold = get_or<double>(j, "threshold", 0.001);
  if (!(c.labels.threshold >= 0.0)) config_error("threshold must be >= 0");
  c.labels.shift_after_close = get_or<bool>(j, "shift_after_close", false);
  if (j.contains("market_close_utc")) c.labels.market_close = parse_time_of_day(j["market_close_utc"].get<std::string>());

  if (j.contains("strategies")) {
    c.strategies.clear();
    for (const auto& s : j["strategies"]) {
      const auto strategy = strategy_or_throw(s.get<std::string>());
      if (std::find(c.strategies.begin(), c.strategies.end(), strategy) != c.strategies.end()) {
        config_error("strategy listed twice: " + s.get<std::string>());
      }
      c.strategies.push_back(strategy);
    }
    if (c.strategies.empty()) config_error("'strategies' is empty");
  }
  if (j.contains("exemplar_order")) {
    c.exemplar_order.clear();
    for (const auto& s : j["exemplar_order"]) c.exemplar_order.push_back(sentiment_or_throw(s.get<std::string>()));
    const std::set<Sentiment> got(c.exemplar_order.begin(), c.exemplar_order.end());
    if (c.exemplar_order.size() != 2 || !got.contains(Sentiment::Negative) || !got.contains(Sentiment::Positive)) {
      config_error("exemplar_order must list Negative and Positive once each");
    }
  }

  const auto sc = get_or<json>(j, "self_consistency", json::object());
  c.self_consistency.enabled = get_or<bool>(sc, "enabled", false);
  c.self_consistency.n = get_or<int>(sc, "n", 5);
  c.self_consistency.temperature = get_or<double>(sc, "temperature", 0.7);
  if (c.self_consistency.n < 1) config_error("self_consistency.n must be >= 1");
  if (!(c.self_consistency.temperature >= 0.0)) config_error("self_consistency.temperature must be >= 0");

  const auto rag = get_or<json>(j, "rag", json::object());
  c.rag.enabled = get_or<bool>(rag, "enabled", false);
  c.rag.k = get_or<std::size_t>(rag, "k", 3);
  c.rag.snippet_chars = get_or<std::size_t>(rag, "snippet_chars", 240);
  if (c.rag.enabled && c.rag.k == 0) config_error("rag.k must be positive");

  const auto gen = get_or<json>(j, "generation", json::object());
  c.generation.model_name = get_or<std::string>(gen, "model_name", c.generation.model_name);
  c.generation.temperature = get_or<double>(gen, "temperature", 0.0);
  c.generation.max_tokens = get_or<int>(gen, "max_tokens", 256);
  if (gen.contains("top_p") && !gen["top_p"].is_null()) c.generation.top_p = gen["top_p"].get<double>();
  if (gen.contains("seed") && !gen["seed"].is_null()) c.generation.seed = gen["seed"].get<std::int64_t>();

  const auto prov = get_or<json>(j, "provider", json::object());
  c.provider.kind = get_or<std::string>(prov, "kind", "stub");
  if (prov.contains("model_name")) c.generation.model_name = prov["model_name"].get<std::string>();
  c.provider.base_url = get_or<std::string>(prov, "base_url", "");
  c.provider.api_key_env = get_or<std::string>(prov, "api_key_env", "OPENAI_API_KEY");
  c.provider.max_in_flight = get_or<std::size_t>(prov, "max_in_flight", 4);
  c.provider.timeout_ms = get_or<int>(prov, "timeout_ms", 60000);
  if (c.provider.kind == "stub") {
    if (!prov.contains("rulebook")) config_error("stub provider needs 'rulebook'");
    c.provider.rulebook = resolve(c.base_dir, prov["rulebook"].get<std::string>());
  } else if (c.provider.kind == "openai-compatible") {
    if (c.provider.base_url.empty()) config_error("openai-compatible provider needs 'base_url'");
  } else {
    config_error("unknown provider kind '" + c.provider.kind + "'");
  }
  if (c.provider.max_in_flight == 0) config_error("provider.max_in_flight must be positive");
  validate(c.generation);

  c.budget = get_or<std::size_t>(j, "budget", 1024);
  if (c.budget == 0) config_error("budget must be positive");
  c.scoring_mode = parse_scoring_mode(get_or<std::string>(j, "scoring_mode", "neutral-as-negative-signal"));
  c.unparseable = parse_unparseable_policy(get_or<std::string>(j, "unparseable", "neutral"));
  c.output_dir = resolve(c.base_dir, get_or<std::string>(j, "output_dir", "out"));
  if (j.contains("cache_path") && !j["cache_path"].is_null()) {
    c.cache_path = resolve(c.base_dir, j["cache_path"].get<std::string>());
  }
  c.workers = get_or<std::size_t>(j, "workers", 4);
  if (c.workers == 0) config_error("workers must be positive");
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const Error& e) {
    throw Error(Errc::config, e.what());
  }
  const auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) config_error("config is not valid JSON: " + path.string());
  return parse_config(j, fs::absolute(path).parent_path());
}

json to_json(const ExperimentConfig& c) {
  const auto& b = c.base_dir;
  json news{{"path", rel(c.news_path, b)}};
  if (c.news_format) news["format"] = *c.news_format == NewsFormat::csv ? "csv" : "jsonl";
  if (!c.column_map.empty()) {
    json cm = json::object();
    for (const auto& [k, v] : c.column_map) cm[k] = v;
    news["column_map"] = cm;
  }
  json templates = json::object();
  for (const auto& [s, p] : c.template_paths) templates[std::string(to_string(s))] = rel(p, b);
  json strategies = json::array();
  for (auto s : c.strategies) strategies.push_back(to_string(s));
  json order = json::array();
  for (auto s : c.exemplar_order) order.push_back(to_string(s));

  json provider{{"kind", c.provider.kind},
                {"max_in_flight", c.provider.max_in_flight},
                {"timeout_ms", c.provider.timeout_ms}};
  if (c.provider.kind == "stub") {
    provider["rulebook"] = rel(c.provider.rulebook, b);
  } else {
    provider["base_url"] = c.provider.base_url;
    provider["api_key_env"] = c.provider.api_key_env;
  }

  json out{{"news", news},
           {"prices", rel(c.prices_path, b)},
           {"exemplars", rel(c.exemplars_path, b)},
           {"knowledge", c.knowledge_path ? json(rel(*c.knowledge_path, b)) : json(nullptr)},
           {"templates", templates},
           {"cutoff", c.cutoff ? json(format_timestamp(*c.cutoff)) : json(nullptr)},
           {"threshold", c.labels.threshold},
           {"shift_after_close", c.labels.shift_after_close},
           {"market_close_utc", format_time_of_day(c.labels.market_close)},
           {"strategies", strategies},
           {"exemplar_order", order},
           {"self_consistency",
            {{"enabled", c.self_consistency.enabled},
             {"n", c.self_consistency.n},
             {"temperature", c.self_consistency.temperature}}},
           {"rag", {{"enabled", c.rag.enabled}, {"k", c.rag.k}, {"snippet_chars", c.rag.snippet_chars}}},
           {"provider", provider},
           {"generation", c.generation},
           {"budget", c.budget},
           {"scoring_mode", to_string(c.scoring_mode)},
           {"unparseable", to_string(c.unparseable)},
           {"output_dir", rel(c.output_dir, b)},
           {"cache_path", c.cache_path ? json(rel(*c.cache_path, b)) : json(nullptr)},
           {"workers", c.workers},
           {"seed", c.seed}};
  return out;
}

// Where results land and how many workers produce them does not change the results.
std::string config_digest(const ExperimentConfig& config) {
  auto j = to_json(config);
  for (const char* k : {"output_dir", "cache_path", "workers"}) j.erase(k);
  return sha256_hex(j.dump());
}

void to_json(json& j, const RunManifest& m) {
  json strategies = json::array();
  for (const auto& s : m.strategies) {
    strategies.push_back({{"strategy", to_string(s.strategy)},
                          {"method", display_name(s.strategy)},
                          {"predictions_file", s.predictions_file},
                          {"prompts_file", s.prompts_file},
                          {"items", s.items},
                          {"metrics", s.metrics ? json(*s.metrics) : json(nullptr)}});
  }
  j = json{{"config_digest", m.config_digest},
           {"corpus_digests", m.corpus_digests},
           {"strategies", strategies},
           {"started_at", format_timestamp(m.started_at)},
           {"finished_at", format_timestamp(m.finished_at)},
           {"provider_calls", m.provider_calls},
           {"cache_hits", m.cache_hits}};
}

void from_json(const json& j, RunManifest& m) {
  m.config_digest = j.value("config_digest", std::string());
  m.corpus_digests = j.value("corpus_digests", std::map<std::string, std::string>{});
  m.strategies.clear();
  for (const auto& s : j.at("strategies")) {
    StrategyResult r;
    const auto strategy = parse_strategy(s.at("strategy").get<std::string>());
    if (!strategy) throw Error(Errc::parse, "unknown strategy in manifest");
    r.strategy = *strategy;
    r.predictions_file = s.value("predictions_file", std::string());
    r.prompts_file = s.value("prompts_file", std::string());
    r.items = s.value("items", std::size_t{0});
    if (s.contains("metrics") && !s["metrics"].is_null()) r.metrics = s["metrics"].get<MetricsReport>();
    m.strategies.push_back(std::move(r));
  }
  if (j.contains("started_at")) m.started_at = parse_timestamp(j["started_at"].get<std::string>());
  if (j.contains("finished_at")) m.finished_at = parse_timestamp(j["finished_at"].get<std::string>());
  m.provider_calls = j.value("provider_calls", std::size_t{0});
  m.cache_hits = j.value("cache_hits", std::size_t{0});
}

RunManifest load_manifest(const fs::path& path) {
  const auto j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::parse, "manifest is not valid JSON: " + path.string());
  try {
    return j.get<RunManifest>();
  } catch (const json::exception& e) {
    throw Error(Errc::parse, "malformed manifest " + path.string() + ": " + e.what());
  }
}

LoadedInputs load_inputs(const ExperimentConfig& config) {
  if (!config.cutoff) config_error("config is missing the mandatory 'cutoff'");
  LoadedInputs in;
  NewsLoadOptions opts;
  opts.columns = config.column_map;
  in.news = load_news(config.news_path, config.news_format.value_or(news_format_for(config.news_path)), opts);
  in.prices = load_prices(config.prices_path);
  in.labeled = attach_labels(in.news.articles, in.prices, config.labels);
  in.split = temporal_split(in.labeled, *config.cutoff);
  in.exemplars = load_exemplars(config.exemplars_path);
  if (config.knowledge_path) in.knowledge = load_knowledge(*config.knowledge_path);
  in.templates = TemplateSet::defaults();
  for (const auto& [s, path] : config.template_paths) in.templates.get(s) = PromptTemplate::from_file(path);
  return in;
}

namespace {

std::vector<LabeledArticle> sorted_targets(const LoadedInputs& in) {
  auto targets = evaluation_set(in.split.test);
  std::sort(targets.begin(), targets.end(),
            [](const LabeledArticle& a, const LabeledArticle& b) { return a.article.id < b.article.id; });
  return targets;
}

std::vector<PromptBundle> build_for(const ExperimentConfig& config, const LoadedInputs& in, Strategy strategy,
                                    std::span<const LabeledArticle> targets, const ExemplarPool& pool,
                                    const ContextRetriever* retriever) {
  std::vector<PromptBundle> bundles;
  bundles.reserve(targets.size());
  for (const auto& t : targets) {
    try {
      std::vector<RetrievedSnippet> context;
      if (retriever) context = retriever->retrieve(t.article, config.rag.k, config.rag.snippet_chars);
      bundles.push_back(build_bundle(strategy, t.article, in, pool, config, context));
    } catch (const Error& e) {
      throw with_context(e, strategy, t.article.id);
    }
  }
  return bundles;
}

std::optional<ContextRetriever> make_retriever(const ExperimentConfig& config, const LoadedInputs& in) {
  if (!config.rag.enabled) return std::nullopt;
  std::vector<NewsArticle> history;
  for (const auto& d : in.split.dev) history.push_back(d.article);
  return ContextRetriever(std::move(history));
}

}  // namespace

std::vector<PromptBundle> build_prompts(const ExperimentConfig& config, const LoadedInputs& inputs,
                                        Strategy strategy) {
  const auto targets = sorted_targets(inputs);
  const ExemplarPool pool(inputs.exemplars);
  const auto retriever = make_retriever(config, inputs);
  return build_for(config, inputs, strategy, targets, pool, retriever ? &*retriever : nullptr);
}

RunManifest run(const ExperimentConfig& config, const RunOptions& options) {
  RunManifest manifest;
  manifest.started_at = utc_now();

  std::vector<Strategy> strategies;
  for (auto s : config.strategies) {
    if (options.only.empty() || std::find(options.only.begin(), options.only.end(), s) != options.only.end()) {
      strategies.push_back(s);
    }
  }
  if (strategies.empty()) config_error("strategy filter selects none of the configured strategies");

  const auto in = load_inputs(config);

  fs::create_directories(config.output_dir);
  const auto& out_dir = config.output_dir;
  write_file(out_dir / "config.json", to_json(config).dump() + "\n");
  write_file(out_dir / "rejections.jsonl", to_jsonl(in.news.rejections));

  manifest.config_digest = config_digest(config);
  manifest.corpus_digests["news"] = sha256_file(config.news_path);
  manifest.corpus_digests["prices"] = sha256_file(config.prices_path);
  manifest.corpus_digests["exemplars"] = sha256_file(config.exemplars_path);
  if (config.knowledge_path) manifest.corpus_digests["knowledge"] = sha256_file(*config.knowledge_path);
  if (config.provider.kind == "stub" && !options.provider) {
    manifest.corpus_digests["rulebook"] = sha256_file(config.provider.rulebook);
  }

  auto provider = options.provider ? options.provider : make_provider(config.provider);
  auto cache = std::make_shared<CompletionCache>(config.effective_cache_path());
  GatewayOptions gopts;
  gopts.max_in_flight = config.provider.max_in_flight;
  gopts.offline = options.offline;
  gopts.sleep = options.sleep;
  CompletionGateway gateway(provider, cache, gopts);

  const auto targets = sorted_targets(in);
  LabelMap labels;
  for (const auto& t : targets) labels.emplace(t.article.id, *t.direction);

  const ExemplarPool pool(in.exemplars);
  const auto retriever = make_retriever(config, in);

  const int samples = config.self_consistency.enabled ? config.self_consistency.n : 1;
  GenerationParams params = config.generation;
  if (config.self_consistency.enabled) params.temperature = config.self_consistency.temperature;

  for (const auto strategy : strategies) {
    const std::string tag(to_string(strategy));
    StrategyResult result;
    result.strategy = strategy;
    result.prompts_file = "prompts_" + tag + ".jsonl";
    result.predictions_file = "predictions_" + tag + ".jsonl";

    const auto bundles = build_for(config, in, strategy, targets, pool, retriever ? &*retriever : nullptr);
    write_file(out_dir / result.prompts_file, to_jsonl_text(bundles));

    // Completion order is arbitrary, so records stream to a partial file and
    // the final file is rewritten in article-id order once all are in.
    const auto partial_path = out_dir / ("predictions_" + tag + ".partial.jsonl");
    std::ofstream partial(partial_path, std::ios::binary | std::ios::trunc);
    std::mutex partial_mutex;
    std::vector<PredictionRecord> records(targets.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
      while (!failed) {
        const std::size_t i = next++;
        if (i >= targets.size()) return;
        const auto& id = targets[i].article.id;
        try {
          std::vector<ParsedCompletion> parsed;
          std::vector<std::string> raw;
          for (int s = 0; s < samples; ++s) {
            raw.push_back(gateway.complete(bundles[i].text, params, static_cast<std::size_t>(s)));
            parsed.push_back(parse_sentiment(raw.back()));
          }
          const auto vote = aggregate_samples(parsed);
          PredictionRecord rec;
          rec.article_id = id;
          rec.strategy = strategy;
          rec.sentiment = vote.sentiment;
          rec.rationale = parsed[vote.chosen_sample].rationale;
          rec.raw_completion = raw[vote.chosen_sample];
          rec.parse_method = vote.sentiment ? parsed[vote.chosen_sample].method : ParseMethod::Unparseable;
          rec.samples_used = std::max<std::size_t>(vote.samples_used, 1);
          {
            std::lock_guard lock(partial_mutex);
            partial << json(rec).dump() << '\n';
            partial.flush();
          }
          records[i] = std::move(rec);
        } catch (const Error& e) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::make_exception_ptr(with_context(e, strategy, id));
          failed = true;
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed = true;
        }
      }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(config.workers, targets.size()));
    {
      std::vector<std::jthread> threads;
      for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    }
    partial.close();
    if (first_error) std::rethrow_exception(first_error);

    write_file(out_dir / result.predictions_file, to_jsonl_text(records));
    fs::remove(partial_path);

    result.items = records.size();
    try {
      result.metrics = evaluate(records, labels, config.scoring_mode, config.unparseable);
    } catch (const Error& e) {
      if (e.code() != Errc::zero_items) throw;
    }
    manifest.strategies.push_back(std::move(result));
  }

  const auto stats = gateway.stats();
  manifest.provider_calls = stats.provider_calls;
  manifest.cache_hits = stats.cache_hits;

  const auto rep = report(std::span<const RunManifest>(&manifest, 1));
  write_file(out_dir / "report.txt", rep.text);
  write_file(out_dir / "report.json", rep.json.dump(2) + "\n");

  manifest.finished_at = utc_now();
  write_file(out_dir / "manifest.json", json(manifest).dump(2) + "\n");
  return manifest;
}

Report report(std::span<const RunManifest> manifests) {
  struct Row {
    Strategy strategy;
    std::optional<double> accuracy, precision, recall;
    const MetricsReport* metrics;
  };
  std::vector<Row> rows;
  for (const auto s : kAllStrategies) {
    for (const auto& m : manifests) {
      for (const auto& r : m.strategies) {
        if (r.strategy != s) continue;
        Row row{s, std::nullopt, std::nullopt, std::nullopt, r.metrics ? &*r.metrics : nullptr};
        if (r.metrics) {
          row.accuracy = r.metrics->metrics.accuracy;
          row.precision = r.metrics->metrics.precision;
          row.recall = r.metrics->metrics.recall;
        }
        rows.push_back(row);
      }
    }
  }

  constexpr std::size_t kMethodWidth = 9;  // "Zero-Shot"
  Report out;
  out.text = pad_right("Method", kMethodWidth) + "  Accuracy  Precision  Recall\n";
  out.json = json{{"columns", {"Method", "Accuracy", "Precision", "Recall"}}, {"rows", json::array()}};
  for (const auto& r : rows) {
    out.text += pad_right(std::string(display_name(r.strategy)), kMethodWidth) + "  " +
                pad_left(percent(r.accuracy), 8) + "  " + pad_left(percent(r.precision), 9) + "  " +
                pad_left(percent(r.recall), 6) + "\n";
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json row{{"method", display_name(r.strategy)},
             {"strategy", to_string(r.strategy)},
             {"accuracy", opt(r.accuracy)},
             {"precision", opt(r.precision)},
             {"recall", opt(r.recall)},
             {"accuracy_pct", percent(r.accuracy)},
             {"precision_pct", percent(r.precision)},
             {"recall_pct", percent(r.recall)}};
    if (r.metrics) row["details"] = *r.metrics;
    out.json["rows"].push_back(std::move(row));
  }
  return out;
}

AuditReport audit_leakage(Timestamp cutoff, const SplitCorpus& split, std::span<const PromptBundle> bundles) {
  AuditReport report;
  std::unordered_map<std::string, Timestamp> test_times;
  for (const auto& t : split.test) {
    test_times.emplace(t.article.id, t.article.timestamp);
    if (t.article.timestamp < cutoff) report.violations.push_back({"test_before_cutoff", t.article.id, t.article.id});
  }
  std::unordered_set<std::string> dev_ids;
  for (const auto& d : split.dev) dev_ids.insert(d.article.id);

  for (const auto& b : bundles) {
    ++report.bundles_checked;
    const auto it = test_times.find(b.target_article_id);
    const Timestamp target_time = it != test_times.end() ? it->second : b.target_timestamp;
    if (dev_ids.contains(b.target_article_id)) {
      report.violations.push_back({"dev_article_as_target", b.target_article_id, b.target_article_id});
    }
    for (const auto& e : b.exemplars) {
      if (e.timestamp >= target_time) report.violations.push_back({"future_exemplar", e.id, b.target_article_id});
    }
    for (const auto& s : b.retrieved) {
      if (s.timestamp >= target_time) report.violations.push_back({"future_snippet", s.id, b.target_article_id});
    }
  }
  return report;
}

AuditReport audit_leakage(const ExperimentConfig& config, const SplitCorpus& split,
                          std::span<const PromptBundle> bundles) {
  if (!config.cutoff) config_error("config is missing the mandatory 'cutoff'");
  return audit_leakage(*config.cutoff, split, bundles);
}

void to_json(json& j, const AuditReport& r) {
  json violations = json::array();
  for (const auto& v : r.violations) {
    violations.push_back({{"kind", v.kind}, {"id", v.id}, {"target_id", v.target_id}});
  }
  j = json{{"passed", r.passed()}, {"bundles_checked", r.bundles_checked}, {"violations", violations}};
}

std::vector<PromptBundle> load_prompt_bundles(const fs::path& jsonl) {
  std::vector<PromptBundle> out;
  const auto text = read_file(jsonl);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw Error(Errc::parse, "not JSON");
      out.push_back(j.get<PromptBundle>());
    } catch (const std::exception& e) {
      throw Error(Errc::parse, jsonl.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace fsbench
