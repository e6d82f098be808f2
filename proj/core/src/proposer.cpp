// SPDX-License-Identifier: Apache-2.0
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "molrefine/proposer.hpp"

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "molrefine/digest.hpp"
#include "molrefine/errors.hpp"

namespace molrefine {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string excerpt(std::string_view body) {
  constexpr std::size_t kMax = 200;
  std::string out(body.substr(0, kMax));
  if (body.size() > kMax) out += "...";
  return out;
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status <= 599); }

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

}  // namespace

RateLimiter::RateLimiter(double requests_per_second) {
  if (requests_per_second > 0.0) {
    interval_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / requests_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_ == Clock::duration::zero()) return;
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = Clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

struct RemoteChatProposer::Impl {
  std::string origin;
  std::string path;
  RateLimiter limiter;
  std::mutex mutex;
  std::condition_variable slot_free;
  int in_flight = 0;
  std::mutex rng_mutex;
  std::mt19937_64 rng{std::random_device{}()};

  explicit Impl(double rps) : limiter(rps) {}

  double jitter_factor(double jitter) {
    std::lock_guard lock(rng_mutex);
    return 1.0 + std::uniform_real_distribution<double>(0.0, std::max(jitter, 0.0))(rng);
  }
};

RemoteChatProposer::RemoteChatProposer(RemoteChatConfig config) : config_(std::move(config)) {
  const auto scheme = config_.base_url.find("://");
  if (config_.base_url.empty() || scheme == std::string::npos) {
    throw ConfigError(fmt::format("proposer base_url '{}' must look like http://host[:port][/path]", config_.base_url));
  }
  if (config_.retry.max_attempts < 1) throw ConfigError("proposer retry attempts must be at least 1");
  if (config_.temperature < 0.0) throw ConfigError("proposer temperature must be non-negative");
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (key == nullptr) throw ConfigError(fmt::format("environment variable {} is not set", config_.api_key_env));
    api_key_ = key;
  }
  impl_ = std::make_unique<Impl>(config_.requests_per_second);
  const auto path_start = config_.base_url.find('/', scheme + 3);
  impl_->origin = config_.base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  impl_->path = prefix + "/chat/completions";
}

RemoteChatProposer::~RemoteChatProposer() = default;

json RemoteChatProposer::request_body(const ProposerRequest& request) {
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
  return {{"model", request.params.model},
          {"messages", std::move(messages)},
          {"temperature", request.params.temperature},
          {"max_tokens", request.params.max_tokens}};
}

ProposerResponse RemoteChatProposer::propose(const ProposerRequest& incoming) {
  ProposerRequest request = incoming;
  if (request.params.model.empty()) request.params.model = config_.model;
  const std::string body = request_body(request).dump();

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  if (config_.max_concurrency > 0) {
    std::unique_lock lock(impl_->mutex);
    impl_->slot_free.wait(lock, [&] { return impl_->in_flight < config_.max_concurrency; });
    ++impl_->in_flight;
  }
  struct Release {
    RemoteChatProposer* self;
    ~Release() {
      if (self->config_.max_concurrency <= 0) return;
      {
        std::lock_guard lock(self->impl_->mutex);
        --self->impl_->in_flight;
      }
      self->impl_->slot_free.notify_one();
    }
  } release{this};

  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_seconds));
  const auto started = Clock::now();
  std::string last_failure;
  for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    if (attempt > 1) {
      auto delay = config_.retry.base_delay * (1LL << std::min(attempt - 2, 20));
      delay = std::min<std::chrono::milliseconds>(delay, config_.retry.max_delay);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          static_cast<double>(delay.count()) * impl_->jitter_factor(config_.retry.jitter)));
    }
    impl_->limiter.acquire();

    httplib::Client client(impl_->origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto result = client.Post(impl_->path, headers, body, "application/json");
    if (!result) {
      last_failure = fmt::format("transport error: {}", httplib::to_string(result.error()));
      continue;
    }
    if (retryable_status(result->status)) {
      last_failure = fmt::format("HTTP {}: {}", result->status, excerpt(result->body));
      continue;
    }
    if (result->status < 200 || result->status >= 300) {
      throw ProposerError(fmt::format("HTTP {}: {}", result->status, excerpt(result->body)));
    }

    ProposerResponse response;
    response.attempts = attempt;
    response.latency_ms = elapsed_ms(started);
    try {
      const auto j = json::parse(result->body);
      const auto& content = j.at("choices").at(0).at("message").at("content");
      if (content.is_string()) response.text = content.get<std::string>();
      if (auto usage = j.find("usage"); usage != j.end() && usage->is_object()) {
        response.usage.prompt_tokens = usage->value("prompt_tokens", 0);
        response.usage.completion_tokens = usage->value("completion_tokens", 0);
      }
    } catch (const json::exception& e) {
      throw ProposerError(fmt::format("malformed completion response: {}: {}", e.what(), excerpt(result->body)));
    }
    if (response.text.empty()) throw ProposerError("completion response has empty content");
    return response;
  }
  throw TransportError(fmt::format("gave up after {} attempts; last failure: {}", config_.retry.max_attempts, last_failure));
}

ScriptedProposer::ScriptedProposer(std::vector<std::string> responses) : responses_(std::move(responses)) {}

ScriptedProposer::ScriptedProposer(std::vector<Rule> rules)
    : rules_(std::move(rules)), rule_used_(rules_.size(), 0), rule_mode_(true) {
  for (const auto& r : rules_) {
    try {
      std::regex check(r.pattern);
    } catch (const std::regex_error& e) {
      throw ConfigError(fmt::format("bad scenario pattern '{}': {}", r.pattern, e.what()));
    }
  }
}

std::shared_ptr<ScriptedProposer> ScriptedProposer::from_json(const json& j) {
  try {
    if (j.is_array()) return std::make_shared<ScriptedProposer>(j.get<std::vector<std::string>>());
    if (j.contains("responses")) {
      return std::make_shared<ScriptedProposer>(j.at("responses").get<std::vector<std::string>>());
    }
    std::vector<Rule> rules;
    for (const auto& r : j.at("rules")) {
      Rule rule;
      rule.pattern = r.at("match").get<std::string>();
      const auto scope = r.value("scope", std::string("last"));
      if (scope != "last" && scope != "all") throw ConfigError(fmt::format("scenario scope '{}' is not last or all", scope));
      rule.whole_conversation = scope == "all";
      if (r.contains("responses")) rule.responses = r.at("responses").get<std::vector<std::string>>();
      rule.respond = r.value("respond", std::string());
      if (rule.responses.empty() && rule.respond.empty()) throw ConfigError("scenario rule has no response");
      rules.push_back(std::move(rule));
    }
    return std::make_shared<ScriptedProposer>(std::move(rules));
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad scenario: {}", e.what()));
  }
}

std::shared_ptr<ScriptedProposer> ScriptedProposer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read scenario {}", path.string()));
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("scenario {}: {}", path.string(), e.what()));
  }
}

std::size_t ScriptedProposer::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

ProposerResponse ScriptedProposer::propose(const ProposerRequest& request) {
  std::lock_guard lock(mutex_);
  ++calls_;
  ProposerResponse response;
  if (!rule_mode_) {
    if (next_ >= responses_.size()) {
      throw ScenarioUnderrun(fmt::format("scripted proposer exhausted after {} responses", responses_.size()));
    }
    response.text = responses_[next_++];
    return response;
  }

  std::string last;
  std::string all;
  for (const auto& m : request.messages) {
    if (m.role == "user") last = m.content;
    all += m.content;
    all += '\n';
  }
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    auto& rule = rules_[i];
    if (!rule.responses.empty() && rule_used_[i] >= rule.responses.size()) continue;
    const std::regex re(rule.pattern);
    std::smatch match;
    const std::string& haystack = rule.whole_conversation ? all : last;
    if (!std::regex_search(haystack, match, re)) continue;
    const std::string& templ = rule.responses.empty() ? rule.respond : rule.responses[rule_used_[i]++];
    response.text = match.format(templ);
    return response;
  }
  throw ScenarioUnderrun(fmt::format("no scenario rule answers prompt: {}", excerpt(last)));
}

CachedProposer::CachedProposer(std::shared_ptr<Proposer> inner, std::filesystem::path directory)
    : inner_(std::move(inner)), directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::string CachedProposer::cache_key(const ProposerRequest& request) {
  json canonical = RemoteChatProposer::request_body(request);
  return sha256_hex(canonical.dump());
}

std::filesystem::path CachedProposer::path_for(const std::string& key) const { return directory_ / (key + ".json"); }

ProposerResponse CachedProposer::propose(const ProposerRequest& request) {
  const auto key = cache_key(request);
  const auto path = path_for(key);
  if (std::ifstream in(path); in) {
    try {
      const auto j = json::parse(in);
      ProposerResponse cached;
      cached.text = j.at("text").get<std::string>();
      cached.usage.prompt_tokens = j.value("prompt_tokens", 0);
      cached.usage.completion_tokens = j.value("completion_tokens", 0);
      cached.from_cache = true;
      if (!cached.text.empty()) return cached;
    } catch (const json::exception&) {
      // Unreadable entry: fall through and overwrite it.
    }
  }
  auto response = inner_->propose(request);
  json entry = {{"key", key},
                {"request", RemoteChatProposer::request_body(request)},
                {"text", response.text},
                {"prompt_tokens", response.usage.prompt_tokens},
                {"completion_tokens", response.usage.completion_tokens}};
  std::ostringstream tid;
  tid << std::this_thread::get_id();
  const auto tmp = directory_ / fmt::format(".{}.{}.tmp", key, tid.str());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << entry.dump() << '\n';
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) std::filesystem::remove(tmp, ec);
  return response;
}

ProposerConfig proposer_config_from_json(const json& j) {
  ProposerConfig c;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "scripted") {
      c.kind = ProposerConfig::Kind::kScripted;
      c.scenario = j.at("scenario").get<std::string>();
    } else if (kind == "remote_chat") {
      c.kind = ProposerConfig::Kind::kRemoteChat;
      auto& r = c.remote;
      r.base_url = j.at("base_url").get<std::string>();
      r.model = j.value("model", r.model);
      r.temperature = j.value("temperature", r.temperature);
      r.max_tokens = j.value("max_tokens", r.max_tokens);
      r.timeout_seconds = j.value("timeout_seconds", r.timeout_seconds);
      r.retry.max_attempts = j.value("max_attempts", r.retry.max_attempts);
      r.retry.base_delay = std::chrono::milliseconds(j.value("backoff_ms", r.retry.base_delay.count()));
      r.api_key_env = j.value("api_key_env", r.api_key_env);
      r.requests_per_second = j.value("requests_per_second", r.requests_per_second);
      r.max_concurrency = j.value("max_concurrency", r.max_concurrency);
      if (r.temperature < 0.0) throw ConfigError("proposer temperature must be non-negative");
      if (r.retry.max_attempts < 1) throw ConfigError("proposer max_attempts must be at least 1");
    } else {
      throw ConfigError(fmt::format("unknown proposer kind '{}'", kind));
    }
    if (j.contains("cache_dir") && !j.at("cache_dir").is_null()) c.cache_dir = j.at("cache_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad proposer config: {}", e.what()));
  }
  return c;
}

ProposerConfig proposer_config_from_spec(const std::string& spec) {
  if (spec.starts_with("scripted:")) {
    ProposerConfig c;
    c.kind = ProposerConfig::Kind::kScripted;
    c.scenario = spec.substr(9);
    return c;
  }
  if (spec.starts_with("remote:")) {
    ProposerConfig c;
    c.kind = ProposerConfig::Kind::kRemoteChat;
    c.remote.base_url = spec.substr(7);
    return c;
  }
  try {
    return proposer_config_from_json(json::parse(spec));
  } catch (const json::parse_error&) {
    throw ConfigError(fmt::format("proposer '{}' is not scripted:<file>, remote:<url> or a JSON object", spec));
  }
}

json proposer_config_to_json(const ProposerConfig& c) {
  json j;
  if (c.kind == ProposerConfig::Kind::kScripted) {
    j = {{"kind", "scripted"}, {"scenario", c.scenario.string()}};
  } else {
    const auto& r = c.remote;
    j = {{"kind", "remote_chat"},
         {"base_url", r.base_url},
         {"model", r.model},
         {"temperature", r.temperature},
         {"max_tokens", r.max_tokens},
         {"timeout_seconds", r.timeout_seconds},
         {"max_attempts", r.retry.max_attempts},
         {"backoff_ms", r.retry.base_delay.count()},
         {"api_key_env", r.api_key_env},
         {"requests_per_second", r.requests_per_second},
         {"max_concurrency", r.max_concurrency}};
  }
  j["cache_dir"] = c.cache_dir ? json(c.cache_dir->string()) : json(nullptr);
  return j;
}

std::function<std::shared_ptr<Proposer>()> make_proposer_factory(const ProposerConfig& config) {
  if (config.kind == ProposerConfig::Kind::kScripted) {
    (void)ScriptedProposer::from_file(config.scenario);  // fail early on a bad scenario
    const auto path = config.scenario;
    auto cache = config.cache_dir;
    return [path, cache] {
      std::shared_ptr<Proposer> p = ScriptedProposer::from_file(path);
      if (cache) p = std::make_shared<CachedProposer>(p, *cache);
      return p;
    };
  }
  std::shared_ptr<Proposer> shared = std::make_shared<RemoteChatProposer>(config.remote);
  if (config.cache_dir) shared = std::make_shared<CachedProposer>(shared, *config.cache_dir);
  return [shared] { return shared; };
}

}  // namespace molrefine
