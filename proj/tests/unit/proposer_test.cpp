// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "molrefine/errors.hpp"
#include "molrefine/proposer.hpp"
#include "test_support.hpp"

namespace molrefine {
namespace {

using nlohmann::json;
using testing::MockChatServer;

RemoteChatConfig config_for(const MockChatServer& server) {
  RemoteChatConfig c;
  c.base_url = server.base_url();
  c.model = "mock-model";
  c.api_key_env = "MOLREFINE_TEST_API_KEY";
  c.retry.base_delay = std::chrono::milliseconds(5);
  c.retry.max_delay = std::chrono::milliseconds(20);
  c.timeout_seconds = 5;
  return c;
}

ProposerRequest request(const std::string& text) {
  ProposerRequest r;
  r.system = "You are a chemist.";
  r.messages = {{"user", text}};
  r.params.temperature = 0.0;
  r.params.max_tokens = 64;
  return r;
}

class ProposerTest : public ::testing::Test {
 protected:
  void SetUp() override { ::setenv("MOLREFINE_TEST_API_KEY", "sk-test-123", 1); }
};

TEST_F(ProposerTest, RequestSchemaAndBearer) {
  MockChatServer server([](const auto&, auto& res, std::size_t) {
    res.set_content(MockChatServer::completion("CCO"), "application/json");
  });
  RemoteChatProposer proposer(config_for(server));
  auto req = request("Given CCO, modify it.");
  req.messages.push_back({"assistant", "CCN"});
  req.messages.push_back({"user", "Again."});
  const auto resp = proposer.propose(req);
  EXPECT_EQ(resp.text, "CCO");
  EXPECT_EQ(resp.attempts, 1);
  EXPECT_EQ(resp.usage.prompt_tokens, 11);
  EXPECT_EQ(resp.usage.completion_tokens, 3);

  const auto seen = server.requests();
  ASSERT_EQ(seen.size(), 1U);
  EXPECT_EQ(seen[0].path, "/v1/chat/completions");
  EXPECT_EQ(seen[0].authorization, "Bearer sk-test-123");
  const auto body = json::parse(seen[0].body);
  EXPECT_EQ(body.at("model"), "mock-model");
  EXPECT_EQ(body.at("temperature"), 0.0);
  EXPECT_EQ(body.at("max_tokens"), 64);
  const auto& messages = body.at("messages");
  ASSERT_EQ(messages.size(), 4U);
  EXPECT_EQ(messages[0], (json{{"role", "system"}, {"content", "You are a chemist."}}));
  EXPECT_EQ(messages[1], (json{{"role", "user"}, {"content", "Given CCO, modify it."}}));
  EXPECT_EQ(messages[2].at("role"), "assistant");
  EXPECT_EQ(messages[3].at("role"), "user");
  for (const auto& m : messages) EXPECT_EQ(m.size(), 2U);
}

TEST_F(ProposerTest, NoSystemMessageWhenEmpty) {
  auto req = request("hi");
  req.system.clear();
  const auto body = RemoteChatProposer::request_body(req);
  EXPECT_EQ(body.at("messages").size(), 1U);
  EXPECT_EQ(body.at("messages")[0].at("role"), "user");
}

TEST_F(ProposerTest, RetriesAfter429) {
  MockChatServer server([](const auto&, auto& res, std::size_t call) {
    if (call == 0) {
      res.status = 429;
      res.set_content(R"({"error":"slow down"})", "application/json");
      return;
    }
    res.set_content(MockChatServer::completion("c1ccccc1"), "application/json");
  });
  RemoteChatProposer proposer(config_for(server));
  const auto resp = proposer.propose(request("x"));
  EXPECT_EQ(resp.text, "c1ccccc1");
  EXPECT_EQ(resp.attempts, 2);
  EXPECT_EQ(server.calls(), 2U);
}

TEST_F(ProposerTest, ServerErrorsExhaustRetries) {
  MockChatServer server([](const auto&, auto& res, std::size_t) { res.status = 503; });
  auto config = config_for(server);
  config.retry.max_attempts = 3;
  RemoteChatProposer proposer(config);
  EXPECT_THROW(proposer.propose(request("x")), TransportError);
  EXPECT_EQ(server.calls(), 3U);
}

TEST_F(ProposerTest, ClientErrorIsNotRetried) {
  MockChatServer server([](const auto&, auto& res, std::size_t) {
    res.status = 401;
    res.set_content("bad key", "text/plain");
  });
  RemoteChatProposer proposer(config_for(server));
  try {
    proposer.propose(request("x"));
    FAIL() << "expected ProposerError";
  } catch (const TransportError&) {
    FAIL() << "401 must not be treated as transient";
  } catch (const ProposerError& e) {
    EXPECT_NE(std::string(e.what()).find("401"), std::string::npos);
  }
  EXPECT_EQ(server.calls(), 1U);
}

TEST_F(ProposerTest, MalformedBodyIsProposerError) {
  MockChatServer server([](const auto&, auto& res, std::size_t) { res.set_content(R"({"choices":[]})", "application/json"); });
  RemoteChatProposer proposer(config_for(server));
  EXPECT_THROW(proposer.propose(request("x")), ProposerError);
}

TEST_F(ProposerTest, UnreachableEndpointIsTransportError) {
  RemoteChatConfig c;
  c.base_url = "http://127.0.0.1:1/v1";
  c.api_key_env.clear();
  c.retry.max_attempts = 2;
  c.retry.base_delay = std::chrono::milliseconds(1);
  c.timeout_seconds = 1;
  RemoteChatProposer proposer(c);
  EXPECT_THROW(proposer.propose(request("x")), TransportError);
}

TEST_F(ProposerTest, ConfigChecks) {
  RemoteChatConfig c;
  c.base_url = "localhost:8000";
  c.api_key_env.clear();
  EXPECT_THROW(RemoteChatProposer{c}, ConfigError);
  c.base_url = "http://localhost:8000/v1";
  c.api_key_env = "MOLREFINE_SURELY_UNSET_VARIABLE";
  EXPECT_THROW(RemoteChatProposer{c}, ConfigError);
}

TEST_F(ProposerTest, CacheHitOnRepeat) {
  MockChatServer server([](const auto&, auto& res, std::size_t) {
    res.set_content(MockChatServer::completion("CCN"), "application/json");
  });
  testing::TempDir dir("cache");
  auto remote = std::make_shared<RemoteChatProposer>(config_for(server));
  CachedProposer cached(remote, dir.path());
  const auto first = cached.propose(request("same"));
  const auto second = cached.propose(request("same"));
  EXPECT_FALSE(first.from_cache);
  EXPECT_TRUE(second.from_cache);
  EXPECT_EQ(second.text, "CCN");
  EXPECT_EQ(server.calls(), 1U);
  cached.propose(request("different"));
  EXPECT_EQ(server.calls(), 2U);
  EXPECT_TRUE(std::filesystem::exists(cached.path_for(CachedProposer::cache_key(request("same")))));
  // A fresh cache over the same directory still hits.
  CachedProposer reopened(remote, dir.path());
  EXPECT_TRUE(reopened.propose(request("same")).from_cache);
  EXPECT_EQ(server.calls(), 2U);
}

TEST_F(ProposerTest, CacheKeyCoversParameters) {
  auto a = request("x");
  auto b = a;
  b.params.temperature = 0.7;
  auto c = a;
  c.system = "Other.";
  EXPECT_NE(CachedProposer::cache_key(a), CachedProposer::cache_key(b));
  EXPECT_NE(CachedProposer::cache_key(a), CachedProposer::cache_key(c));
  EXPECT_EQ(CachedProposer::cache_key(a), CachedProposer::cache_key(request("x")));
  EXPECT_EQ(CachedProposer::cache_key(a).size(), 64U);
}

TEST_F(ProposerTest, ConcurrencyCapHolds) {
  std::atomic<int> in_flight{0}, peak{0};
  MockChatServer server([&](const auto&, auto& res, std::size_t) {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(30));
    --in_flight;
    res.set_content(MockChatServer::completion("C"), "application/json");
  });
  auto config = config_for(server);
  config.max_concurrency = 2;
  RemoteChatProposer proposer(config);
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) threads.emplace_back([&] { EXPECT_EQ(proposer.propose(request("x")).text, "C"); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(server.calls(), 8U);
  EXPECT_LE(peak.load(), 2);
}

TEST_F(ProposerTest, RateLimiterSpacesRequests) {
  MockChatServer server([](const auto&, auto& res, std::size_t) {
    res.set_content(MockChatServer::completion("C"), "application/json");
  });
  auto config = config_for(server);
  config.requests_per_second = 20;
  RemoteChatProposer proposer(config);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) proposer.propose(request("x"));
  EXPECT_GE(std::chrono::steady_clock::now() - start, std::chrono::milliseconds(190));
}

TEST(ScriptedProposerTest, ListModeAndUnderrun) {
  ScriptedProposer p(std::vector<std::string>{"A", "B"});
  EXPECT_EQ(p.propose(request("x")).text, "A");
  EXPECT_EQ(p.propose(request("x")).text, "B");
  EXPECT_THROW(p.propose(request("x")), ScenarioUnderrun);
  EXPECT_EQ(p.calls(), 3U);
}

TEST(ScriptedProposerTest, RuleMode) {
  const auto p = ScriptedProposer::from_json(json::parse(R"({"rules": [
    {"match": "^Given (\\S+), modify", "respond": "$1N"},
    {"match": "not chemically valid", "responses": ["first", "second"]},
    {"match": "Given (\\S+),", "scope": "all", "respond": "[$1]"}
  ]})"));
  EXPECT_EQ(p->propose(request("Given CCO, modify it")).text, "CCON");
  EXPECT_EQ(p->propose(request("X is not chemically valid")).text, "first");
  EXPECT_EQ(p->propose(request("X is not chemically valid")).text, "second");
  auto convo = request("Given CC, modify");
  convo.messages.push_back({"assistant", "CCN"});
  convo.messages.push_back({"user", "Unfortunately no."});
  EXPECT_EQ(p->propose(convo).text, "[CC]");
  EXPECT_THROW(p->propose(request("nothing matches")), ScenarioUnderrun);
  EXPECT_THROW(ScriptedProposer::from_json(json::parse(R"({"rules": [{"match": "("}]})")), ConfigError);
}

TEST(ProposerConfigTest, SpecsAndFactory) {
  const auto scripted = proposer_config_from_spec("scripted:" + testing::fixture_path("bench_smoke/scenario.json").string());
  EXPECT_EQ(scripted.kind, ProposerConfig::Kind::kScripted);
  auto factory = make_proposer_factory(scripted);
  EXPECT_NE(factory().get(), factory().get());
  const auto remote = proposer_config_from_spec("remote:http://localhost:9/v1");
  EXPECT_EQ(remote.kind, ProposerConfig::Kind::kRemoteChat);
  EXPECT_EQ(remote.remote.base_url, "http://localhost:9/v1");
  const auto back = proposer_config_from_json(proposer_config_to_json(remote));
  EXPECT_EQ(back.remote.base_url, remote.remote.base_url);
  EXPECT_THROW(proposer_config_from_spec("carrier-pigeon:x"), ConfigError);
}

}  // namespace
}  // namespace molrefine
