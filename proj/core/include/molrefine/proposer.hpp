// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace molrefine {

/// Bad response or non-retryable HTTP status.
class ProposerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Network failure or retries exhausted.
class TransportError : public ProposerError {
 public:
  using ProposerError::ProposerError;
};

/// A scripted proposer ran out of responses; always a bug in the test scenario.
class ScenarioUnderrun : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ChatMessage {
  std::string role;  // "user" or "assistant"
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct GenerationParams {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 128;

  bool operator==(const GenerationParams&) const = default;
};

struct ProposerRequest {
  /// Omitted from the wire when empty.
  std::string system;
  std::vector<ChatMessage> messages;
  GenerationParams params;
};

struct TokenUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
};

struct ProposerResponse {
  std::string text;
  TokenUsage usage;
  double latency_ms = 0.0;
  /// HTTP attempts made; 0 for scripted or cached answers.
  int attempts = 0;
  bool from_cache = false;
};

class Proposer {
 public:
  virtual ~Proposer() = default;
  /// Safe to call from several threads.
  virtual ProposerResponse propose(const ProposerRequest& request) = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
  /// Each delay is multiplied by a uniform factor in [1, 1 + jitter).
  double jitter = 0.25;
};

struct RemoteChatConfig {
  std::string base_url;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 128;
  double timeout_seconds = 60.0;
  RetryPolicy retry;
  /// Environment variable holding the bearer token; empty sends no header.
  std::string api_key_env = "OPENAI_API_KEY";
  /// 0 disables the limiter.
  double requests_per_second = 0.0;
  /// Concurrent in-flight requests; 0 means unlimited.
  int max_concurrency = 0;
};

/// Spaces request starts at least 1/rate apart across all callers.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_second);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

/// OpenAI-compatible POST {base_url}/chat/completions.
class RemoteChatProposer : public Proposer {
 public:
  /// Throws ConfigError for a missing or malformed base_url, or when the key
  /// variable is named but unset.
  explicit RemoteChatProposer(RemoteChatConfig config);
  ~RemoteChatProposer() override;

  ProposerResponse propose(const ProposerRequest& request) override;
  const RemoteChatConfig& config() const { return config_; }

  /// Request body as sent on the wire.
  static nlohmann::json request_body(const ProposerRequest& request);

 private:
  struct Impl;
  RemoteChatConfig config_;
  std::string api_key_;
  std::unique_ptr<Impl> impl_;
};

/// Canned answers. In list mode responses are handed out in order; in rule mode
/// the first rule whose regex matches the newest user message (or the whole
/// conversation, per rule) answers, with $1.. substituted from the match.
class ScriptedProposer : public Proposer {
 public:
  struct Rule {
    std::string pattern;
    /// Search the concatenated conversation instead of the newest user message.
    bool whole_conversation = false;
    /// Used once each, in order; when empty `respond` answers every time.
    std::vector<std::string> responses;
    std::string respond;
  };

  explicit ScriptedProposer(std::vector<std::string> responses);
  explicit ScriptedProposer(std::vector<Rule> rules);

  /// {"responses": [...]} or {"rules": [{"match", "respond" | "responses", "scope"}]}.
  static std::shared_ptr<ScriptedProposer> from_json(const nlohmann::json& j);
  static std::shared_ptr<ScriptedProposer> from_file(const std::filesystem::path& path);

  ProposerResponse propose(const ProposerRequest& request) override;
  std::size_t calls() const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> responses_;
  std::vector<Rule> rules_;
  std::vector<std::size_t> rule_used_;
  bool rule_mode_ = false;
  std::size_t next_ = 0;
  std::size_t calls_ = 0;
};

/// Content-addressed disk cache in front of another proposer.
class CachedProposer : public Proposer {
 public:
  CachedProposer(std::shared_ptr<Proposer> inner, std::filesystem::path directory);

  ProposerResponse propose(const ProposerRequest& request) override;

  /// SHA-256 over the canonical JSON of model, system text, messages and parameters.
  static std::string cache_key(const ProposerRequest& request);
  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::shared_ptr<Proposer> inner_;
  std::filesystem::path directory_;
};

struct ProposerConfig {
  enum class Kind { kRemoteChat, kScripted };
  Kind kind = Kind::kScripted;
  RemoteChatConfig remote;
  std::filesystem::path scenario;
  /// Wrap in a CachedProposer when set.
  std::optional<std::filesystem::path> cache_dir;
};

/// Parses "scripted:<file>", "remote:<base_url>" or a JSON object with "kind".
ProposerConfig proposer_config_from_json(const nlohmann::json& j);
ProposerConfig proposer_config_from_spec(const std::string& spec);
nlohmann::json proposer_config_to_json(const ProposerConfig& config);

/// Returns a source of proposers, one call per refinement trace. Remote
/// proposers are shared (one rate limiter per endpoint); scripted proposers are
/// fresh per trace so each trace replays the scenario from the start.
std::function<std::shared_ptr<Proposer>()> make_proposer_factory(const ProposerConfig& config);

}  // namespace molrefine
