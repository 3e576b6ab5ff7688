#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "fsbench/error.hpp"
#include "fsbench/time_util.hpp"

namespace fsbench {

struct GenerationParams {
  std::string model_name;
  double temperature = 0.0;
  int max_tokens = 256;
  std::optional<double> top_p;
  std::optional<std::int64_t> seed;
};

// Throws Errc::config on a negative temperature, non-positive max_tokens or
// top_p outside (0, 1].
void validate(const GenerationParams& params);

void to_json(nlohmann::json& j, const GenerationParams& p);
void from_json(const nlohmann::json& j, GenerationParams& p);

// SHA-256 over the compact, key-sorted JSON of
// {provider, model_name, params, prompt, sample_index}.
std::string completion_cache_key(std::string_view provider, const GenerationParams& params, std::string_view prompt,
                                 std::size_t sample_index);

struct CompletionRecord {
  std::string cache_key;
  std::string prompt_digest;
  GenerationParams params;
  std::size_t sample_index = 0;
  std::string completion_text;
  std::string provider;
  std::uint64_t latency_ms = 0;
  Timestamp created_at;
};

void to_json(nlohmann::json& j, const CompletionRecord& r);
void from_json(const nlohmann::json& j, CompletionRecord& r);

// Thrown by providers. Transient failures are retried by the gateway.
class ProviderError : public Error {
 public:
  ProviderError(Errc code, const std::string& what, bool retryable) : Error(code, what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string name() const = 0;
  virtual bool uses_network() const = 0;
  virtual std::string generate(const std::string& prompt, const GenerationParams& params) = 0;
};

// Canned completions chosen by substring match against the prompt. A rule
// fires when every one of its patterns occurs; the first firing rule in
// declaration order wins, otherwise the fallback is returned.
class StubProvider : public Provider {
 public:
  struct Rule {
    std::vector<std::string> patterns;
    std::string completion;
  };

  StubProvider(std::vector<Rule> rules, std::string fallback);

  // {"rules": [{"pattern": "recall" | ["a", "b"], "completion": "..."}], "fallback": "..."}
  static std::unique_ptr<StubProvider> from_json(const nlohmann::json& rulebook);
  static std::unique_ptr<StubProvider> from_file(const std::filesystem::path& path);

  std::string name() const override { return "stub"; }
  bool uses_network() const override { return false; }
  std::string generate(const std::string& prompt, const GenerationParams& params) override;

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  std::vector<Rule> rules_;
  std::string fallback_;
  std::atomic<std::size_t> calls_{0};
};

struct HttpProviderConfig {
  std::string base_url;  // e.g. https://api.example.com/v1
  std::string api_key;   // sent as a bearer token when non-empty
  int timeout_ms = 60000;
};

// OpenAI-compatible POST {base_url}/chat/completions with a single user message.
class OpenAiCompatibleProvider : public Provider {
 public:
  explicit OpenAiCompatibleProvider(HttpProviderConfig config);

  std::string name() const override;
  bool uses_network() const override { return true; }
  std::string generate(const std::string& prompt, const GenerationParams& params) override;

 private:
  HttpProviderConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_prefix_;
};

// Append-only JSONL journal of CompletionRecord with an in-memory index.
// Later lines win on duplicate keys; unreadable lines (e.g. a torn final
// write) are skipped on load.
class CompletionCache {
 public:
  CompletionCache() = default;
  explicit CompletionCache(std::filesystem::path journal);

  std::optional<CompletionRecord> find(const std::string& key) const;
  void put(const CompletionRecord& record);

  std::size_t size() const;
  std::size_t skipped_lines() const noexcept { return skipped_; }

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CompletionRecord> index_;
  std::mutex write_mutex_;
  std::ofstream journal_;
  std::size_t skipped_ = 0;
};

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  int max_attempts = 5;

  // Delay after failed attempt number `attempt` (1-based).
  std::chrono::milliseconds delay_after(int attempt) const;
};

struct GatewayOptions {
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
  bool offline = false;  // refuse any call to a network provider
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

struct GatewayStats {
  std::size_t provider_calls = 0;  // completions fetched from the provider
  std::size_t cache_hits = 0;
  std::size_t attempts = 0;  // provider requests including retries
};

class CompletionGateway {
 public:
  CompletionGateway(std::shared_ptr<Provider> provider, std::shared_ptr<CompletionCache> cache,
                    GatewayOptions options = {});

  // Cached completion if present, otherwise one provider fetch (with retries)
  // that is persisted before returning. Concurrent callers asking for the
  // same key share one fetch.
  std::string complete(const std::string& prompt, const GenerationParams& params, std::size_t sample_index = 0);
  CompletionRecord complete_record(const std::string& prompt, const GenerationParams& params,
                                   std::size_t sample_index = 0);

  GatewayStats stats() const;
  const Provider& provider() const noexcept { return *provider_; }

 private:
  CompletionRecord fetch(const std::string& key, const std::string& prompt, const GenerationParams& params,
                         std::size_t sample_index);

  std::shared_ptr<Provider> provider_;
  std::shared_ptr<CompletionCache> cache_;
  GatewayOptions options_;
  std::counting_semaphore<1024> in_flight_;
  std::mutex pending_mutex_;
  std::unordered_map<std::string, std::shared_future<CompletionRecord>> pending_;
  std::atomic<std::size_t> provider_calls_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> attempts_{0};
};

}  // namespace fsbench
