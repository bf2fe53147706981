#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "histolens/prompt.hpp"

namespace histolens {

/// One configured model endpoint. Credentials are read from the environment
/// variable named here; config files never carry secrets.
struct ProviderConfig {
  std::string name;
  /// Wire shape: "anthropic", "openai" (also Moonshot), "ernie" or "mock".
  std::string api = "mock";
  std::string endpoint;
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string credential_env_var;
  /// 0 disables rate limiting.
  int requests_per_minute = 0;
  int timeout_seconds = 60;
  /// Mock only: directory of recorded responses.
  std::string fixture_dir;

  static ProviderConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

/// Reads `{"providers": [...]}`; relative fixture dirs resolve against the file's directory.
std::vector<ProviderConfig> load_provider_configs(const std::filesystem::path& path);

struct CacheEntry {
  std::string key;
  std::string response_text;
  std::string created_at;
  std::string provider_metadata;

  nlohmann::ordered_json to_json() const;
  static CacheEntry from_json(const nlohmann::json& j);
};

/// Content hash of (provider name, model id, temperature, rendered prompt).
std::string cache_key(const ProviderConfig& config, const Prompt& prompt);

/// One file per entry named by the hex key. An empty directory path keeps
/// entries in memory only.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir = {});

  std::optional<CacheEntry> get(const std::string& key) const;
  void put(const CacheEntry& entry);
  const std::filesystem::path& directory() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::mutex mem_mu_;
  std::map<std::string, CacheEntry> memory_;
};

/// Sliding-window limiter: at most `max_requests` starts in any window.
class RateLimiter {
 public:
  using Clock = std::chrono::steady_clock;

  RateLimiter(std::size_t max_requests, Clock::duration window);

  /// Blocks until a slot is free, then claims it.
  void acquire();

 private:
  std::mutex mu_;
  std::size_t max_requests_;
  Clock::duration window_;
  std::deque<Clock::time_point> starts_;
};

struct BackendReply {
  /// HTTP status; 0 when the request never completed.
  int status = 200;
  bool timed_out = false;
  std::string text;
  /// Raw body (or transport error) for diagnostics.
  std::string body;
  std::string metadata;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply send(const ProviderConfig& config, const Prompt& prompt, const std::string& credential) = 0;
};

/// Backend driven by a callback; used for fault injection and scripted mocks.
class CallbackBackend : public ChatBackend {
 public:
  using Fn = std::function<BackendReply(const ProviderConfig&, const Prompt&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}
  BackendReply send(const ProviderConfig& config, const Prompt& prompt, const std::string&) override {
    return fn_(config, prompt);
  }

 private:
  Fn fn_;
};

struct GatewayOptions {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
  std::chrono::steady_clock::duration rate_window = std::chrono::minutes(1);
  std::function<void(std::chrono::milliseconds)> sleep;
  std::function<std::string()> now;
  std::function<std::optional<std::string>(const std::string&)> read_credential;
};

/// Uniform, cached, rate-limited access to the configured providers.
/// Safe to share across threads.
class Gateway {
 public:
  Gateway(std::vector<ProviderConfig> providers, std::filesystem::path cache_dir, GatewayOptions options = {});
  ~Gateway();

  /// Overrides the backend for one wire shape ("anthropic", "openai", "ernie", "mock").
  void set_backend(const std::string& api, std::shared_ptr<ChatBackend> backend);

  TemplateRegistry& templates() { return templates_; }
  const TemplateRegistry& templates() const { return templates_; }

  const ProviderConfig& provider(const std::string& name) const;
  const std::string& default_provider() const { return default_provider_; }
  void set_default_provider(const std::string& name);

  std::string complete(const ProviderConfig& config, const Prompt& prompt);
  std::string complete(const Prompt& prompt) { return complete(provider(default_provider_), prompt); }

  /// complete() + parse_structured(), re-prompting with repair directives up
  /// to kMaxRepairRounds times before throwing UnparseableAfterRepairs.
  nlohmann::json complete_structured(const ProviderConfig& config, const Prompt& prompt, const std::string& schema_id);
  nlohmann::json complete_structured(const Prompt& prompt, const std::string& schema_id) {
    return complete_structured(provider(default_provider_), prompt, schema_id);
  }

  /// Backend invocations made so far (cache hits are free).
  std::size_t network_calls() const { return network_calls_.load(); }

  ResponseCache& cache() { return cache_; }

 private:
  std::shared_ptr<std::mutex> key_lock(const std::string& key);
  RateLimiter* limiter_for(const ProviderConfig& config);
  ChatBackend& backend_for(const ProviderConfig& config);

  std::map<std::string, ProviderConfig> providers_;
  std::string default_provider_;
  ResponseCache cache_;
  GatewayOptions options_;
  TemplateRegistry templates_;

  std::mutex backends_mu_;
  std::map<std::string, std::shared_ptr<ChatBackend>> backends_;
  std::mutex limiters_mu_;
  std::map<std::string, std::unique_ptr<RateLimiter>> limiters_;
  std::mutex keys_mu_;
  std::map<std::string, std::weak_ptr<std::mutex>> key_locks_;
  std::atomic<std::size_t> network_calls_{0};
};

/// Current UTC time as ISO-8601 with seconds.
std::string utc_now_iso8601();

}  // namespace histolens
