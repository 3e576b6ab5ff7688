#include <httplib.h>

#include "fsbench/gateway.hpp"

namespace fsbench {
namespace {

// Splits https://host:port/some/prefix into origin and path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(Errc::config, "base_url lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? std::string() : url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {std::move(origin), std::move(prefix)};
}

}  // namespace

OpenAiCompatibleProvider::OpenAiCompatibleProvider(HttpProviderConfig config) : config_(std::move(config)) {
  std::tie(origin_, path_prefix_) = split_base_url(config_.base_url);
}

std::string OpenAiCompatibleProvider::name() const { return "openai-compatible@" + config_.base_url; }

std::string OpenAiCompatibleProvider::generate(const std::string& prompt, const GenerationParams& params) {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                static_cast<time_t>((timeout.count() % 1000) * 1000));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                          static_cast<time_t>((timeout.count() % 1000) * 1000));

  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  nlohmann::json body{{"model", params.model_name},
                      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
                      {"temperature", params.temperature},
                      {"max_tokens", params.max_tokens},
                      {"stream", false}};
  if (params.top_p) body["top_p"] = *params.top_p;
  if (params.seed) body["seed"] = *params.seed;

  auto res = client.Post(path_prefix_ + "/chat/completions", headers, body.dump(), "application/json");
  if (!res) {
    throw ProviderError(Errc::provider, "request failed: " + httplib::to_string(res.error()), true);
  }
  const int status = res->status;
  if (status == 401 || status == 403) {
    throw ProviderError(Errc::auth, "provider rejected credentials (HTTP " + std::to_string(status) + ")", false);
  }
  if (status == 408 || status == 429 || status >= 500) {
    throw ProviderError(Errc::provider, "transient provider failure (HTTP " + std::to_string(status) + ")", true);
  }
  if (status < 200 || status >= 300) {
    throw ProviderError(Errc::provider, "provider returned HTTP " + std::to_string(status), false);
  }

  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    throw ProviderError(Errc::malformed_response, "provider response lacks choices", false);
  }
  const auto& choice = j["choices"][0];
  if (choice.contains("message") && choice["message"].is_object() && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    return choice["message"]["content"].get<std::string>();
  }
  if (choice.contains("text") && choice["text"].is_string()) return choice["text"].get<std::string>();
  throw ProviderError(Errc::malformed_response, "provider response has no message content", false);
}

}  // namespace fsbench
