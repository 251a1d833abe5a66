#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "isobench/evaluation.hpp"

namespace isobench {

struct Completion {
  std::string text;
  std::optional<int> completion_tokens;  // endpoint-reported usage
};

class ChatEndpoint {
 public:
  virtual ~ChatEndpoint() = default;
  /// Throws AuthError, TransportError or ResponseMalformed.
  virtual Completion complete(const std::vector<Message>& messages, const SamplingParams& sampling) = 0;
};

/// Token bucket: `per_minute` requests per minute, bursts up to `burst`.
/// per_minute <= 0 disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double per_minute, double burst = 1.0);
  void acquire();

 private:
  using Clock = std::chrono::steady_clock;
  double rate_;  // tokens per second
  double burst_;
  double tokens_;
  Clock::time_point last_;
  std::mutex mu_;
};

struct HttpEndpointConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-4";
  std::string api_key_env = "OPENAI_API_KEY";  // empty: no Authorization header
  int max_attempts = 3;
  double backoff_seconds = 1.0;  // doubled after each failed attempt
  double timeout_seconds = 120.0;
  double requests_per_minute = 0.0;
};

/// OpenAI-compatible `POST {base_url}/chat/completions`. Retries 429, 5xx and
/// transport failures with exponential backoff.
class HttpChatEndpoint : public ChatEndpoint {
 public:
  /// Throws AuthError when the credential variable is named but unset.
  explicit HttpChatEndpoint(HttpEndpointConfig config);
  Completion complete(const std::vector<Message>& messages, const SamplingParams& sampling) override;
  int attempts_made() const { return attempts_; }

 private:
  HttpEndpointConfig config_;
  std::string api_key_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // prefix + /chat/completions
  RateLimiter limiter_;
  int attempts_ = 0;
};

/// Offline endpoint answering from a JSON script:
///   {"default": {"first": [...], "fixing": [...]},
///    "lemmas": {"name": {"first": [...], "fixing": [...]}}}
/// Entries are strings or {"text", "completion_tokens", "error"}; the n-th
/// call for a lemma and round gets entry n (the last one repeats). The lemma
/// is the last `lemma|theorem NAME` in the target user message outside
/// <sim>/<dep> blocks ("" for an anonymous statement); a fixing round is
/// recognised by a final user message in curly brackets or "Try again.".
class ScriptedEndpoint : public ChatEndpoint {
 public:
  static std::unique_ptr<ScriptedEndpoint> from_json(const std::string& text);
  static std::unique_ptr<ScriptedEndpoint> from_file(const std::string& path);

  Completion complete(const std::vector<Message>& messages, const SamplingParams& sampling) override;

  struct Call {
    std::string lemma;
    Round round;
    std::vector<Message> messages;
  };
  std::vector<Call> calls() const;

  /// Name of the lemma stated last in `text`, "" when none.
  static std::string lemma_key(const std::string& text);
  static bool is_fixing_prompt(const std::vector<Message>& messages);

 private:
  struct Entry {
    std::string text;
    std::optional<int> completion_tokens;
    std::string error;  // ErrorCode name to throw
  };
  struct Rule {
    std::vector<Entry> first, fixing;
  };
  Rule default_;
  std::map<std::string, Rule> rules_;
  std::map<std::pair<std::string, Round>, int> counters_;
  std::vector<Call> calls_;
  mutable std::mutex mu_;
};

}  // namespace isobench
