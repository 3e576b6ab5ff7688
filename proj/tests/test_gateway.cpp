#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "fsbench/digest.hpp"
#include "support.hpp"

using namespace fsbench;
using json = nlohmann::json;

namespace {

GenerationParams params(double temperature = 0.0) { return {"m", temperature, 256, std::nullopt, std::nullopt}; }

std::shared_ptr<StubProvider> stub() {
  return StubProvider::from_json(json::parse(R"({
    "rules": [
      {"pattern": "recall", "completion": "1. Costs rise.\nFinal answer: Negative"},
      {"pattern": ["earnings", "beat"], "completion": "Final answer: Positive"},
      {"pattern": "earnings", "completion": "Final answer: Neutral"}
    ],
    "fallback": "No idea."
  })"));
}

// Scripted OpenAI-compatible endpoint. Responses are consumed in order; the
// last one repeats.
class ScriptedServer {
 public:
  struct Reply {
    int status;
    std::string body;
  };

  explicit ScriptedServer(std::vector<Reply> script) : script_(std::move(script)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto i = std::min<std::size_t>(hits_++, script_.size() - 1);
      last_body_ = req.body;
      last_auth_ = req.get_header_value("Authorization");
      res.status = script_[i].status;
      res.set_content(script_[i].body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  std::size_t hits() const { return hits_; }
  const std::string& last_body() const { return last_body_; }
  const std::string& last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::vector<Reply> script_;
  std::atomic<std::size_t> hits_{0};
  std::string last_body_;
  std::string last_auth_;
  int port_ = 0;
  std::thread thread_;
};

std::string ok_body(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

struct SleepLog {
  std::vector<std::chrono::milliseconds> delays;
  std::function<void(std::chrono::milliseconds)> fn() {
    return [this](std::chrono::milliseconds d) { delays.push_back(d); };
  }
};

}  // namespace

TEST_CASE("generation params") {
  GenerationParams p;
  CHECK(p.temperature == 0.0);
  CHECK(p.max_tokens == 256);
  CHECK_NOTHROW(validate(p));
  p.temperature = -0.1;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.top_p = 0.0;
  CHECK_THROWS_AS(validate(p), Error);
  p = {};
  p.max_tokens = 0;
  CHECK_THROWS_AS(validate(p), Error);
}

TEST_CASE("cache keys") {
  const auto k = completion_cache_key("stub", params(), "hello", 0);
  CHECK(k.size() == 64);
  CHECK(k == completion_cache_key("stub", params(), "hello", 0));
  CHECK(k != completion_cache_key("stub", params(), "hello", 1));
  CHECK(k != completion_cache_key("stub", params(0.7), "hello", 0));
  CHECK(k != completion_cache_key("other", params(), "hello", 0));
  CHECK(k != completion_cache_key("stub", params(), "hello ", 0));
  // Frozen: the key must not drift across builds or platforms.
  const json canonical{{"model_name", "m"},
                       {"params", {{"max_tokens", 256}, {"model_name", "m"}, {"seed", nullptr}, {"temperature", 0.0},
                                   {"top_p", nullptr}}},
                       {"prompt", "hello"},
                       {"provider", "stub"},
                       {"sample_index", 0}};
  CHECK(canonical.dump() ==
        R"({"model_name":"m","params":{"max_tokens":256,"model_name":"m","seed":null,"temperature":0.0,"top_p":null},"prompt":"hello","provider":"stub","sample_index":0})");
  CHECK(k == sha256_hex(canonical.dump()));
}

TEST_CASE("stub provider") {
  auto s = stub();
  CHECK(s->generate("a product recall", params()) == "1. Costs rise.\nFinal answer: Negative");
  CHECK(s->generate("earnings beat", params()) == "Final answer: Positive");
  CHECK(s->generate("earnings miss", params()) == "Final answer: Neutral");
  CHECK(s->generate("recall after earnings beat", params()).find("Negative") != std::string::npos);  // order wins
  CHECK(s->generate("weather", params()) == "No idea.");
  CHECK_FALSE(s->uses_network());
  CHECK_THROWS_AS(StubProvider::from_json(json::parse(R"({"rules": [], "fallback": "x"})")), Error);
  CHECK_THROWS_AS(StubProvider::from_json(json::parse(R"({"rules": [{"pattern": "a", "completion": "b"}]})")),
                  Error);
}

TEST_CASE("gateway caches completions") {
  testing::TempDir tmp;
  auto provider = stub();
  auto cache = std::make_shared<CompletionCache>(tmp / "cache.jsonl");
  CompletionGateway gw(provider, cache);

  CHECK(gw.complete("recall", params()) == "1. Costs rise.\nFinal answer: Negative");
  CHECK(gw.complete("recall", params()) == "1. Costs rise.\nFinal answer: Negative");
  CHECK(provider->calls() == 1);
  CHECK(gw.stats().cache_hits == 1);

  gw.complete("recall", params(0.7), 0);
  gw.complete("recall", params(0.7), 1);
  CHECK(provider->calls() == 3);
  CHECK(cache->size() == 3);

  SUBCASE("journal survives a restart and a torn tail") {
    {
      std::ofstream(tmp / "cache.jsonl", std::ios::app) << "{\"cache_key\":\"trunc";
    }
    auto reopened = std::make_shared<CompletionCache>(tmp / "cache.jsonl");
    CHECK(reopened->size() == 3);
    CHECK(reopened->skipped_lines() == 1);
    auto fresh = stub();
    CompletionGateway again(fresh, reopened);
    again.complete("recall", params());
    CHECK(fresh->calls() == 0);
    again.complete("something new", params());
    CompletionCache third(tmp / "cache.jsonl");
    CHECK(third.size() == 4);
  }
}

TEST_CASE("concurrent callers share one fetch") {
  struct Slow : Provider {
    std::atomic<int> calls{0};
    std::string name() const override { return "slow"; }
    bool uses_network() const override { return false; }
    std::string generate(const std::string& p, const GenerationParams&) override {
      ++calls;
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      return "echo " + p;
    }
  };
  auto slow = std::make_shared<Slow>();
  CompletionGateway gw(slow, nullptr, GatewayOptions{{}, 2, false, {}});
  std::vector<std::thread> threads;
  std::vector<std::string> out(8);
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&, i] { out[i] = gw.complete(i % 2 ? "odd" : "even", params()); });
  }
  for (auto& t : threads) t.join();
  CHECK(slow->calls == 2);
  CHECK(out[0] == "echo even");
  CHECK(out[1] == "echo odd");
}

TEST_CASE("http provider retries a 429 and records the final attempt") {
  ScriptedServer server({{429, "{\"error\":\"slow down\"}"}, {200, ok_body("Final answer: Positive")}});
  SleepLog sleeps;
  auto provider = std::make_shared<OpenAiCompatibleProvider>(HttpProviderConfig{server.base_url(), "sk-test", 5000});
  CompletionGateway gw(provider, nullptr, GatewayOptions{{}, 4, false, sleeps.fn()});

  const auto rec = gw.complete_record("hello", params());
  CHECK(rec.completion_text == "Final answer: Positive");
  CHECK(server.hits() == 2);
  CHECK(gw.stats().attempts == 2);
  CHECK(gw.stats().provider_calls == 1);
  REQUIRE(sleeps.delays.size() == 1);
  CHECK(sleeps.delays[0] == std::chrono::milliseconds(1000));
  CHECK(rec.latency_ms < 5000);
  CHECK(server.last_auth() == "Bearer sk-test");
  const auto sent = json::parse(server.last_body());
  CHECK(sent["model"] == "m");
  CHECK(sent["max_tokens"] == 256);
  CHECK(sent["temperature"] == 0.0);
  CHECK(sent["messages"][0]["content"] == "hello");

  gw.complete("hello", params());
  CHECK(server.hits() == 2);  // cached
}

TEST_CASE("http provider failure modes") {
  SUBCASE("auth is not retried") {
    ScriptedServer server({{401, "{}"}});
    SleepLog sleeps;
    auto p = std::make_shared<OpenAiCompatibleProvider>(HttpProviderConfig{server.base_url(), "bad", 5000});
    CompletionGateway gw(p, nullptr, GatewayOptions{{}, 4, false, sleeps.fn()});
    try {
      gw.complete("x", params());
      FAIL("expected auth error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::auth);
    }
    CHECK(server.hits() == 1);
    CHECK(sleeps.delays.empty());
  }
  SUBCASE("retries exhaust with exponential backoff") {
    ScriptedServer server({{503, "{}"}});
    SleepLog sleeps;
    auto p = std::make_shared<OpenAiCompatibleProvider>(HttpProviderConfig{server.base_url(), "", 5000});
    CompletionGateway gw(p, nullptr, GatewayOptions{{}, 4, false, sleeps.fn()});
    try {
      gw.complete("x", params());
      FAIL("expected retries_exhausted");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::retries_exhausted);
    }
    CHECK(server.hits() == 5);
    using ms = std::chrono::milliseconds;
    CHECK(sleeps.delays == std::vector<ms>{ms(1000), ms(2000), ms(4000), ms(8000)});
  }
  SUBCASE("malformed body") {
    ScriptedServer server({{200, "{\"choices\": []}"}});
    auto p = std::make_shared<OpenAiCompatibleProvider>(HttpProviderConfig{server.base_url(), "", 5000});
    CompletionGateway gw(p, nullptr, GatewayOptions{{}, 4, false, [](auto) {}});
    try {
      gw.complete("x", params());
      FAIL("expected malformed_response");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::malformed_response);
    }
  }
  SUBCASE("offline mode refuses network providers") {
    auto p = std::make_shared<OpenAiCompatibleProvider>(HttpProviderConfig{"http://127.0.0.1:9", "", 100});
    CompletionGateway gw(p, nullptr, GatewayOptions{{}, 4, true, [](auto) {}});
    try {
      gw.complete("x", params());
      FAIL("expected network_forbidden");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::network_forbidden);
    }
  }
}
