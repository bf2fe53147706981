#include "histolens/gateway.hpp"

#include <cstdlib>
#include <ctime>
#include <thread>

#include "histolens/errors.hpp"
#include "histolens/hashing.hpp"
#include "histolens/log.hpp"
#include "histolens/providers.hpp"
#include "histolens/structured.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

std::string utc_now_iso8601() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------
// Config

ProviderConfig ProviderConfig::from_json(const json& j) {
  for (const char* secret : {"api_key", "apikey", "key", "credential", "token", "secret", "access_token"}) {
    if (j.contains(secret))
      throw Error(ErrorCode::ConfigInvalid, std::string("provider config must not contain '") + secret +
                                                "'; name an environment variable in credential_env_var");
  }
  ProviderConfig c;
  c.name = j.at("name").get<std::string>();
  c.api = j.value("api", std::string("mock"));
  c.endpoint = j.value("endpoint", std::string());
  c.model_id = j.value("model_id", std::string());
  c.temperature = j.value("temperature", 0.0);
  c.max_tokens = j.value("max_tokens", 1024);
  c.credential_env_var = j.value("credential_env_var", std::string());
  c.requests_per_minute = j.value("requests_per_minute", 0);
  c.timeout_seconds = j.value("timeout_seconds", 60);
  c.fixture_dir = j.value("fixture_dir", std::string());
  if (c.name.empty()) throw Error(ErrorCode::ConfigInvalid, "provider name must not be empty");
  if (c.api != "anthropic" && c.api != "openai" && c.api != "ernie" && c.api != "mock")
    throw Error(ErrorCode::ConfigInvalid, "provider '" + c.name + "': unknown api '" + c.api + "'");
  if (c.temperature < 0) throw Error(ErrorCode::ConfigInvalid, "provider '" + c.name + "': temperature must be >= 0");
  if (c.max_tokens <= 0) throw Error(ErrorCode::ConfigInvalid, "provider '" + c.name + "': max_tokens must be > 0");
  if (c.api != "mock" && c.credential_env_var.empty())
    throw Error(ErrorCode::ConfigInvalid, "provider '" + c.name + "': credential_env_var is required");
  if (c.endpoint.empty()) c.endpoint = providers::default_endpoint(c.api);
  return c;
}

ordered_json ProviderConfig::to_json() const {
  ordered_json j;
  j["name"] = name;
  j["api"] = api;
  j["endpoint"] = endpoint;
  j["model_id"] = model_id;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  j["credential_env_var"] = credential_env_var;
  j["requests_per_minute"] = requests_per_minute;
  j["timeout_seconds"] = timeout_seconds;
  j["fixture_dir"] = fixture_dir;
  return j;
}

std::vector<ProviderConfig> load_provider_configs(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  std::vector<ProviderConfig> out;
  for (const auto& p : j.at("providers")) {
    auto c = ProviderConfig::from_json(p);
    if (!c.fixture_dir.empty() && std::filesystem::path(c.fixture_dir).is_relative())
      c.fixture_dir = (path.parent_path() / c.fixture_dir).lexically_normal().string();
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cache

ordered_json CacheEntry::to_json() const {
  ordered_json j;
  j["key"] = key;
  j["response_text"] = response_text;
  j["created_at"] = created_at;
  j["provider_metadata"] = provider_metadata;
  return j;
}

CacheEntry CacheEntry::from_json(const json& j) {
  return CacheEntry{j.at("key").get<std::string>(), j.at("response_text").get<std::string>(),
                    j.value("created_at", std::string()), j.value("provider_metadata", std::string())};
}

std::string cache_key(const ProviderConfig& config, const Prompt& prompt) {
  const json material = json::array({config.name, config.model_id, config.temperature, prompt.system, prompt.user});
  return sha256_hex(material.dump());
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<CacheEntry> ResponseCache::get(const std::string& key) const {
  if (dir_.empty()) {
    std::lock_guard lock(mem_mu_);
    auto it = memory_.find(key);
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  const auto path = dir_ / key;
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    auto entry = CacheEntry::from_json(json::parse(text::read_file(path)));
    if (entry.key != key) {
      logger()->warn("cache entry {} has mismatched key; ignoring", path.string());
      return std::nullopt;
    }
    return entry;
  } catch (const std::exception& e) {
    logger()->warn("unreadable cache entry {}: {}", path.string(), e.what());
    return std::nullopt;
  }
}

void ResponseCache::put(const CacheEntry& entry) {
  if (dir_.empty()) {
    std::lock_guard lock(mem_mu_);
    memory_[entry.key] = entry;
    return;
  }
  text::write_file(dir_ / entry.key, entry.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Rate limiting

RateLimiter::RateLimiter(std::size_t max_requests, Clock::duration window)
    : max_requests_(max_requests), window_(window) {
  if (max_requests_ == 0) throw Error(ErrorCode::InvalidArgument, "rate limit must allow at least one request");
}

void RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  for (;;) {
    const auto now = Clock::now();
    while (!starts_.empty() && now - starts_.front() >= window_) starts_.pop_front();
    if (starts_.size() < max_requests_) {
      starts_.push_back(now);
      return;
    }
    const auto wake = starts_.front() + window_;
    lock.unlock();
    std::this_thread::sleep_until(wake);
    lock.lock();
  }
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::vector<ProviderConfig> providers, std::filesystem::path cache_dir, GatewayOptions options)
    : cache_(std::move(cache_dir)), options_(std::move(options)) {
  for (auto& p : providers) {
    if (default_provider_.empty()) default_provider_ = p.name;
    auto name = p.name;
    if (!providers_.emplace(std::move(name), std::move(p)).second)
      throw Error(ErrorCode::ConfigInvalid, "duplicate provider name");
  }
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (!options_.now) options_.now = utc_now_iso8601;
  if (!options_.read_credential) {
    options_.read_credential = [](const std::string& var) -> std::optional<std::string> {
      const char* v = std::getenv(var.c_str());
      if (!v || !*v) return std::nullopt;
      return std::string(v);
    };
  }
  if (options_.max_attempts < 1) options_.max_attempts = 1;
  auto http = std::make_shared<providers::HttpChatBackend>();
  backends_["anthropic"] = http;
  backends_["openai"] = http;
  backends_["ernie"] = http;
  backends_["mock"] = std::make_shared<providers::MockBackend>();
}

Gateway::~Gateway() = default;

void Gateway::set_backend(const std::string& api, std::shared_ptr<ChatBackend> backend) {
  std::lock_guard lock(backends_mu_);
  backends_[api] = std::move(backend);
}

const ProviderConfig& Gateway::provider(const std::string& name) const {
  auto it = providers_.find(name);
  if (it == providers_.end()) throw Error(ErrorCode::ConfigInvalid, "unknown provider '" + name + "'");
  return it->second;
}

void Gateway::set_default_provider(const std::string& name) {
  provider(name);
  default_provider_ = name;
}

std::shared_ptr<std::mutex> Gateway::key_lock(const std::string& key) {
  std::lock_guard lock(keys_mu_);
  auto& weak = key_locks_[key];
  auto strong = weak.lock();
  if (!strong) {
    strong = std::make_shared<std::mutex>();
    weak = strong;
  }
  if (key_locks_.size() > 4096) {
    std::erase_if(key_locks_, [](const auto& kv) { return kv.second.expired(); });
  }
  return strong;
}

RateLimiter* Gateway::limiter_for(const ProviderConfig& config) {
  if (config.requests_per_minute <= 0) return nullptr;
  std::lock_guard lock(limiters_mu_);
  auto& slot = limiters_[config.name];
  if (!slot)
    slot = std::make_unique<RateLimiter>(static_cast<std::size_t>(config.requests_per_minute), options_.rate_window);
  return slot.get();
}

ChatBackend& Gateway::backend_for(const ProviderConfig& config) {
  std::lock_guard lock(backends_mu_);
  auto it = backends_.find(config.api);
  if (it == backends_.end() || !it->second)
    throw Error(ErrorCode::ConfigInvalid, "no backend for api '" + config.api + "'");
  return *it->second;
}

namespace {

std::string excerpt(const std::string& body) {
  constexpr std::size_t kMax = 300;
  if (body.size() <= kMax) return body;
  std::size_t cut = kMax;
  while (cut > 0 && (static_cast<unsigned char>(body[cut]) & 0xC0) == 0x80) --cut;
  return body.substr(0, cut) + "...";
}

}  // namespace

std::string Gateway::complete(const ProviderConfig& config, const Prompt& prompt) {
  const std::string key = cache_key(config, prompt);
  auto lock = key_lock(key);
  std::lock_guard guard(*lock);

  if (auto hit = cache_.get(key)) return hit->response_text;

  std::string credential;
  if (!config.credential_env_var.empty()) {
    auto value = options_.read_credential(config.credential_env_var);
    if (!value)
      throw Error(ErrorCode::AuthFailure, "provider '" + config.name + "': environment variable " +
                                              config.credential_env_var + " is not set");
    credential = std::move(*value);
  }

  ChatBackend& backend = backend_for(config);
  RateLimiter* limiter = limiter_for(config);
  BackendReply last;
  for (int attempt = 0; attempt < options_.max_attempts; ++attempt) {
    if (attempt > 0) options_.sleep(options_.base_backoff * (1 << (attempt - 1)));
    if (limiter) limiter->acquire();
    ++network_calls_;
    try {
      last = backend.send(config, prompt, credential);
    } catch (const std::exception& e) {
      last = BackendReply{0, false, "", e.what(), ""};
    }
    if (last.status >= 200 && last.status < 300) {
      cache_.put(CacheEntry{key, last.text, options_.now(), last.metadata});
      return last.text;
    }
    if (last.status == 401 || last.status == 403)
      throw Error(ErrorCode::AuthFailure, "provider '" + config.name + "' rejected credentials (status " +
                                              std::to_string(last.status) + "): " + excerpt(last.body));
    const bool transient =
        last.timed_out || last.status == 0 || last.status == 408 || last.status == 429 || last.status >= 500;
    if (!transient)
      throw Error(ErrorCode::ProviderError, "provider '" + config.name + "' returned status " +
                                                std::to_string(last.status) + ": " + excerpt(last.body));
    logger()->warn("provider '{}' attempt {}/{} failed (status {}{})", config.name, attempt + 1,
                   options_.max_attempts, last.status, last.timed_out ? ", timeout" : "");
  }
  if (last.status == 429)
    throw Error(ErrorCode::RateLimitedAfterRetries,
                "provider '" + config.name + "' still rate limited after " + std::to_string(options_.max_attempts) +
                    " attempts");
  if (last.timed_out)
    throw Error(ErrorCode::Timeout, "provider '" + config.name + "' timed out after " +
                                        std::to_string(options_.max_attempts) + " attempts");
  throw Error(ErrorCode::ProviderError, "provider '" + config.name + "' failed with status " +
                                            std::to_string(last.status) + ": " + excerpt(last.body));
}

json Gateway::complete_structured(const ProviderConfig& config, const Prompt& prompt, const std::string& schema_id) {
  Prompt current = prompt;
  for (int round = 0;; ++round) {
    const std::string reply = complete(config, current);
    auto parsed = structured::parse_structured(reply, schema_id);
    if (auto* value = std::get_if<json>(&parsed)) return std::move(*value);
    const auto& directive = std::get<structured::RepairDirective>(parsed);
    if (round >= structured::kMaxRepairRounds)
      throw Error(ErrorCode::UnparseableAfterRepairs,
                  "reply for schema '" + schema_id + "' still invalid after " +
                      std::to_string(structured::kMaxRepairRounds) + " repair rounds: " + directive.error);
    logger()->info("schema '{}' violation ({}); requesting repair {}/{}", schema_id, directive.error, round + 1,
                   structured::kMaxRepairRounds);
    current = structured::make_repair_prompt(prompt, reply, directive, round + 1);
  }
}

}  // namespace histolens
