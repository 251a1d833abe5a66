#include "isobench/endpoint.hpp"

#include <httplib.h>

#include <cstdlib>
#include <json.hpp>
#include <regex>
#include <thread>

#include "isobench/error.hpp"
#include "isobench/text.hpp"

namespace isobench {

using json = nlohmann::json;

RateLimiter::RateLimiter(double per_minute, double burst)
    : rate_(per_minute / 60.0), burst_(std::max(burst, 1.0)), tokens_(burst_), last_(Clock::now()) {}

void RateLimiter::acquire() {
  if (rate_ <= 0) return;
  std::unique_lock lock(mu_);
  for (;;) {
    auto now = Clock::now();
    tokens_ = std::min(burst_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
    std::this_thread::sleep_for(wait);  // holding the lock keeps callers in order
  }
}

// ---------------------------------------------------------------------------

HttpChatEndpoint::HttpChatEndpoint(HttpEndpointConfig config)
    : config_(std::move(config)), limiter_(config_.requests_per_minute) {
  if (!config_.api_key_env.empty()) {
    const char* key = std::getenv(config_.api_key_env.c_str());
    if (!key || !*key) throw Error(ErrorCode::AuthError, "credential variable " + config_.api_key_env + " is not set");
    api_key_ = key;
  }
  static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.base_url, m, url))
    throw Error(ErrorCode::ConfigError, "bad endpoint base URL " + config_.base_url);
  origin_ = m[1];
  std::string prefix = m[2];
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
  if (config_.max_attempts < 1) throw Error(ErrorCode::ConfigError, "max_attempts must be >= 1");
}

Completion HttpChatEndpoint::complete(const std::vector<Message>& messages, const SamplingParams& sampling) {
  json body;
  body["model"] = config_.model;
  body["messages"] = json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = sampling.temperature;
  body["top_p"] = sampling.top_p;
  body["max_tokens"] = sampling.max_generation_units;
  const std::string payload = body.dump();

  httplib::Client client(origin_);
  auto secs = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(secs));
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  std::string last_error;
  double backoff = config_.backoff_seconds;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2;
    }
    limiter_.acquire();
    ++attempts_;
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw Error(ErrorCode::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::TransportError, "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      auto j = json::parse(res->body);
      Completion c;
      const auto& content = j.at("choices").at(0).at("message").at("content");
      c.text = content.is_null() ? "" : content.get<std::string>();
      if (j.contains("usage") && j["usage"].contains("completion_tokens"))
        c.completion_tokens = j["usage"]["completion_tokens"].get<int>();
      return c;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ResponseMalformed, e.what());
    }
  }
  throw Error(ErrorCode::TransportError,
              "giving up after " + std::to_string(config_.max_attempts) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------

std::unique_ptr<ScriptedEndpoint> ScriptedEndpoint::from_json(const std::string& text) {
  auto ep = std::make_unique<ScriptedEndpoint>();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("endpoint script: ") + e.what());
  }
  auto entries = [](const json& arr) {
    std::vector<Entry> out;
    for (const auto& e : arr) {
      Entry x;
      if (e.is_string()) {
        x.text = e.get<std::string>();
      } else {
        x.text = e.value("text", "");
        if (e.contains("completion_tokens")) x.completion_tokens = e["completion_tokens"].get<int>();
        x.error = e.value("error", "");
      }
      out.push_back(std::move(x));
    }
    return out;
  };
  auto rule = [&](const json& r) {
    Rule out;
    if (r.contains("first")) out.first = entries(r["first"]);
    if (r.contains("fixing")) out.fixing = entries(r["fixing"]);
    return out;
  };
  if (j.contains("default")) ep->default_ = rule(j["default"]);
  if (j.contains("lemmas"))
    for (auto& [name, r] : j["lemmas"].items()) ep->rules_[name] = rule(r);
  return ep;
}

std::unique_ptr<ScriptedEndpoint> ScriptedEndpoint::from_file(const std::string& path) {
  return from_json(read_file(path));
}

std::string ScriptedEndpoint::lemma_key(const std::string& text) {
  static const std::regex blocks(R"(<(sim|dep)>[\s\S]*?</\1>)");
  static const std::regex head(
      R"((?:^|\n)\s*(?:lemma|theorem)\b\s*(?:\(\s*in\s+[^)]*\)\s*)?([A-Za-z][A-Za-z0-9_'.]*)?)");
  const std::string target = std::regex_replace(text, blocks, "");
  std::string key;  // stays empty for an anonymous statement
  for (std::sregex_iterator it(target.begin(), target.end(), head), end; it != end; ++it)
    key = (*it)[1].matched ? (*it)[1].str() : "";
  return key;
}

bool ScriptedEndpoint::is_fixing_prompt(const std::vector<Message>& messages) {
  if (messages.size() < 3 || messages.back().role != "user") return false;
  const auto& last = messages.back().content;
  return last == kTryAgainMessage || (!last.empty() && last.front() == '{' && last.back() == '}');
}

Completion ScriptedEndpoint::complete(const std::vector<Message>& messages, const SamplingParams&) {
  if (messages.empty()) throw Error(ErrorCode::ResponseMalformed, "empty prompt");
  Round round = is_fixing_prompt(messages) ? Round::Fixing : Round::First;
  const auto& target = round == Round::Fixing ? messages[messages.size() - 3] : messages.back();
  std::string key = lemma_key(target.content);
  Entry entry;
  {
    std::lock_guard lock(mu_);
    calls_.push_back({key, round, messages});
    auto it = rules_.find(key);
    const Rule& rule = it == rules_.end() ? default_ : it->second;
    const auto& list = round == Round::Fixing ? rule.fixing : rule.first;
    int n = counters_[{key, round}]++;
    if (!list.empty()) entry = list[std::min<std::size_t>(n, list.size() - 1)];
  }
  if (!entry.error.empty()) throw Error(parse_error_code(entry.error), "scripted failure");
  return {entry.text, entry.completion_tokens};
}

std::vector<ScriptedEndpoint::Call> ScriptedEndpoint::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

}  // namespace isobench
