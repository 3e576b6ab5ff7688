#include "fsbench/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "fsbench/digest.hpp"

namespace fsbench {
namespace {

std::ptrdiff_t clamp_in_flight(std::size_t n) {
  return static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(n, 1, 1024));
}

}  // namespace

void validate(const GenerationParams& p) {
  if (!(p.temperature >= 0.0)) throw Error(Errc::config, "temperature must be >= 0");
  if (p.max_tokens <= 0) throw Error(Errc::config, "max_tokens must be positive");
  if (p.top_p && !(*p.top_p > 0.0 && *p.top_p <= 1.0)) throw Error(Errc::config, "top_p must lie in (0, 1]");
}

void to_json(nlohmann::json& j, const GenerationParams& p) {
  j = nlohmann::json{{"model_name", p.model_name}, {"temperature", p.temperature}, {"max_tokens", p.max_tokens}};
  j["top_p"] = p.top_p ? nlohmann::json(*p.top_p) : nlohmann::json(nullptr);
  j["seed"] = p.seed ? nlohmann::json(*p.seed) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, GenerationParams& p) {
  p.model_name = j.value("model_name", std::string());
  p.temperature = j.value("temperature", 0.0);
  p.max_tokens = j.value("max_tokens", 256);
  p.top_p.reset();
  p.seed.reset();
  if (auto it = j.find("top_p"); it != j.end() && !it->is_null()) p.top_p = it->get<double>();
  if (auto it = j.find("seed"); it != j.end() && !it->is_null()) p.seed = it->get<std::int64_t>();
}

std::string completion_cache_key(std::string_view provider, const GenerationParams& params, std::string_view prompt,
                                 std::size_t sample_index) {
  // nlohmann::json objects keep keys sorted and dump() emits no whitespace.
  const nlohmann::json canonical{{"provider", provider},
                                 {"model_name", params.model_name},
                                 {"params", params},
                                 {"prompt", prompt},
                                 {"sample_index", sample_index}};
  return sha256_hex(canonical.dump());
}

void to_json(nlohmann::json& j, const CompletionRecord& r) {
  j = nlohmann::json{{"cache_key", r.cache_key},
                     {"prompt_digest", r.prompt_digest},
                     {"params", r.params},
                     {"sample_index", r.sample_index},
                     {"completion_text", r.completion_text},
                     {"provider", r.provider},
                     {"latency_ms", r.latency_ms},
                     {"created_at", format_timestamp(r.created_at)}};
}

void from_json(const nlohmann::json& j, CompletionRecord& r) {
  r.cache_key = j.at("cache_key").get<std::string>();
  r.prompt_digest = j.value("prompt_digest", std::string());
  r.params = j.at("params").get<GenerationParams>();
  r.sample_index = j.value("sample_index", std::size_t{0});
  r.completion_text = j.at("completion_text").get<std::string>();
  r.provider = j.value("provider", std::string());
  r.latency_ms = j.value("latency_ms", std::uint64_t{0});
  r.created_at = parse_timestamp(j.at("created_at").get<std::string>());
}

StubProvider::StubProvider(std::vector<Rule> rules, std::string fallback)
    : rules_(std::move(rules)), fallback_(std::move(fallback)) {
  if (rules_.empty()) throw Error(Errc::config, "stub rulebook has no rules");
  for (const auto& r : rules_) {
    if (r.patterns.empty()) throw Error(Errc::config, "stub rule without a pattern");
  }
}

std::unique_ptr<StubProvider> StubProvider::from_json(const nlohmann::json& rulebook) {
  try {
    std::vector<Rule> rules;
    for (const auto& r : rulebook.at("rules")) {
      Rule rule;
      const auto& pattern = r.at("pattern");
      if (pattern.is_array()) {
        rule.patterns = pattern.get<std::vector<std::string>>();
      } else {
        rule.patterns.push_back(pattern.get<std::string>());
      }
      rule.completion = r.at("completion").get<std::string>();
      rules.push_back(std::move(rule));
    }
    if (!rulebook.contains("fallback")) throw Error(Errc::config, "stub rulebook lacks a fallback completion");
    return std::make_unique<StubProvider>(std::move(rules), rulebook.at("fallback").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config, std::string("malformed stub rulebook: ") + e.what());
  }
}

std::unique_ptr<StubProvider> StubProvider::from_file(const std::filesystem::path& path) {
  const auto j = nlohmann::json::parse(read_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(Errc::config, "stub rulebook is not valid JSON: " + path.string());
  return from_json(j);
}

std::string StubProvider::generate(const std::string& prompt, const GenerationParams&) {
  ++calls_;
  for (const auto& rule : rules_) {
    const bool all = std::all_of(rule.patterns.begin(), rule.patterns.end(),
                                 [&](const std::string& p) { return prompt.find(p) != std::string::npos; });
    if (all) return rule.completion;
  }
  return fallback_;
}

CompletionCache::CompletionCache(std::filesystem::path journal) {
  if (std::filesystem::exists(journal)) {
    const auto text = read_file(journal);
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const std::string_view line(text.data() + pos, nl - pos);
      pos = nl + 1;
      if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      try {
        if (j.is_discarded()) throw Error(Errc::parse, "bad line");
        auto rec = j.get<CompletionRecord>();
        index_[rec.cache_key] = std::move(rec);
      } catch (const std::exception&) {
        ++skipped_;
      }
    }
    // A torn final write leaves no newline; start appends on a fresh line.
    if (!text.empty() && text.back() != '\n') {
      std::ofstream(journal, std::ios::binary | std::ios::app) << '\n';
    }
  } else if (journal.has_parent_path()) {
    std::filesystem::create_directories(journal.parent_path());
  }
  journal_.open(journal, std::ios::binary | std::ios::app);
  if (!journal_) throw Error(Errc::io, "cannot open cache journal " + journal.string());
}

std::optional<CompletionRecord> CompletionCache::find(const std::string& key) const {
  std::shared_lock lock(mutex_);
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  return std::nullopt;
}

void CompletionCache::put(const CompletionRecord& record) {
  {
    std::lock_guard lock(write_mutex_);
    if (journal_.is_open()) {
      journal_ << nlohmann::json(record).dump() << '\n';
      journal_.flush();
    }
  }
  std::unique_lock lock(mutex_);
  index_[record.cache_key] = record;
}

std::size_t CompletionCache::size() const {
  std::shared_lock lock(mutex_);
  return index_.size();
}

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
  const double scaled = static_cast<double>(base.count()) * std::pow(factor, attempt - 1);
  return std::chrono::milliseconds(static_cast<std::int64_t>(scaled));
}

CompletionGateway::CompletionGateway(std::shared_ptr<Provider> provider, std::shared_ptr<CompletionCache> cache,
                                     GatewayOptions options)
    : provider_(std::move(provider)),
      cache_(cache ? std::move(cache) : std::make_shared<CompletionCache>()),
      options_(std::move(options)),
      in_flight_(clamp_in_flight(options_.max_in_flight)) {
  if (!provider_) throw Error(Errc::config, "no provider configured");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (options_.retry.max_attempts < 1) throw Error(Errc::config, "max_attempts must be at least 1");
}

std::string CompletionGateway::complete(const std::string& prompt, const GenerationParams& params,
                                        std::size_t sample_index) {
  return complete_record(prompt, params, sample_index).completion_text;
}

CompletionRecord CompletionGateway::complete_record(const std::string& prompt, const GenerationParams& params,
                                                    std::size_t sample_index) {
  validate(params);
  const auto key = completion_cache_key(provider_->name(), params, prompt, sample_index);
  if (auto hit = cache_->find(key)) {
    ++cache_hits_;
    return *hit;
  }

  std::promise<CompletionRecord> promise;
  std::shared_future<CompletionRecord> future;
  bool owner = false;
  {
    std::lock_guard lock(pending_mutex_);
    if (auto it = pending_.find(key); it != pending_.end()) {
      future = it->second;
    } else if (auto hit = cache_->find(key)) {
      ++cache_hits_;
      return *hit;
    } else {
      future = promise.get_future().share();
      pending_.emplace(key, future);
      owner = true;
    }
  }
  if (!owner) {
    auto rec = future.get();
    ++cache_hits_;
    return rec;
  }

  try {
    auto rec = fetch(key, prompt, params, sample_index);
    cache_->put(rec);
    promise.set_value(rec);
    std::lock_guard lock(pending_mutex_);
    pending_.erase(key);
    return rec;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(pending_mutex_);
    pending_.erase(key);
    throw;
  }
}

CompletionRecord CompletionGateway::fetch(const std::string& key, const std::string& prompt,
                                          const GenerationParams& params, std::size_t sample_index) {
  if (options_.offline && provider_->uses_network()) {
    throw Error(Errc::network_forbidden, "offline mode: refusing to call provider " + provider_->name());
  }
  std::string last_error;
  for (int attempt = 1; attempt <= options_.retry.max_attempts; ++attempt) {
    std::string text;
    const auto started = std::chrono::steady_clock::now();
    try {
      in_flight_.acquire();
      ++attempts_;
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      text = provider_->generate(prompt, params);
    } catch (const ProviderError& e) {
      if (!e.retryable()) throw;
      last_error = e.what();
      if (attempt < options_.retry.max_attempts) options_.sleep(options_.retry.delay_after(attempt));
      continue;
    }
    const auto elapsed = std::chrono::steady_clock::now() - started;
    ++provider_calls_;
    CompletionRecord rec;
    rec.cache_key = key;
    rec.prompt_digest = sha256_hex(prompt);
    rec.params = params;
    rec.sample_index = sample_index;
    rec.completion_text = std::move(text);
    rec.provider = provider_->name();
    rec.latency_ms =
        static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count());
    rec.created_at = utc_now();
    return rec;
  }
  throw Error(Errc::retries_exhausted, "provider " + provider_->name() + " failed after " +
                                           std::to_string(options_.retry.max_attempts) +
                                           " attempts: " + last_error);
}

GatewayStats CompletionGateway::stats() const {
  return {provider_calls_.load(), cache_hits_.load(), attempts_.load()};
}

}  // namespace fsbench
