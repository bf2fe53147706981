#include "histolens/providers.hpp"

#include <httplib.h>

#include <algorithm>

#include "histolens/errors.hpp"
#include "histolens/log.hpp"
#include "histolens/text.hpp"

namespace histolens::providers {

using nlohmann::json;

std::string default_endpoint(const std::string& api) {
  if (api == "anthropic") return "https://api.anthropic.com/v1/messages";
  if (api == "openai") return "https://api.openai.com/v1/chat/completions";
  if (api == "ernie")
    return "https://aip.baidubce.com/rpc/2.0/ai_custom/v1/wenxinworkshop/chat/completions";
  return "";
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::ConfigInvalid, "endpoint is not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpRequest build_request(const ProviderConfig& config, const Prompt& prompt, const std::string& credential) {
  auto [base, path] = split_url(config.endpoint.empty() ? default_endpoint(config.api) : config.endpoint);
  HttpRequest req{base, path, {}, {}};
  json body;
  if (config.api == "anthropic") {
    req.headers["x-api-key"] = credential;
    req.headers["anthropic-version"] = "2023-06-01";
    body["model"] = config.model_id;
    body["max_tokens"] = config.max_tokens;
    body["temperature"] = config.temperature;
    if (!prompt.system.empty()) body["system"] = prompt.system;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt.user}}});
  } else if (config.api == "openai") {
    req.headers["Authorization"] = "Bearer " + credential;
    body["model"] = config.model_id;
    body["max_tokens"] = config.max_tokens;
    body["temperature"] = config.temperature;
    body["messages"] = json::array();
    if (!prompt.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", prompt.system}});
    body["messages"].push_back({{"role", "user"}, {"content", prompt.user}});
  } else if (config.api == "ernie") {
    req.path += (req.path.find('?') == std::string::npos ? "?" : "&");
    req.path += "access_token=" + credential;
    // ERNIE accepts temperatures in (0, 1]; 0.01 is its closest to greedy.
    body["temperature"] = std::clamp(config.temperature, 0.01, 1.0);
    body["max_output_tokens"] = config.max_tokens;
    if (!prompt.system.empty()) body["system"] = prompt.system;
    body["messages"] = json::array({{{"role", "user"}, {"content", prompt.user}}});
  } else {
    throw Error(ErrorCode::ConfigInvalid, "api '" + config.api + "' has no HTTP adapter");
  }
  req.headers["Content-Type"] = "application/json";
  req.body = body.dump();
  return req;
}

BackendReply parse_response(const std::string& api, int status, const std::string& body) {
  BackendReply reply;
  reply.status = status;
  reply.body = body;
  if (status < 200 || status >= 300) return reply;
  const json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    reply.status = 502;
    return reply;
  }
  try {
    if (api == "anthropic") {
      std::string text;
      for (const auto& block : j.at("content"))
        if (block.value("type", "") == "text") text += block.at("text").get<std::string>();
      reply.text = std::move(text);
      reply.metadata = json{{"id", j.value("id", "")}, {"stop_reason", j.value("stop_reason", "")}}.dump();
    } else if (api == "openai") {
      reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      reply.metadata = json{{"id", j.value("id", "")}, {"model", j.value("model", "")}}.dump();
    } else if (api == "ernie") {
      if (j.contains("error_code")) {
        const int code = j.at("error_code").get<int>();
        reply.status = (code == 110 || code == 111) ? 401 : (code == 4 || code == 17 || code == 18) ? 429 : 500;
        return reply;
      }
      reply.text = j.at("result").get<std::string>();
      reply.metadata = json{{"id", j.value("id", "")}}.dump();
    }
  } catch (const json::exception&) {
    reply.status = 502;
  }
  return reply;
}

BackendReply HttpChatBackend::send(const ProviderConfig& config, const Prompt& prompt, const std::string& credential) {
  const HttpRequest req = build_request(config, prompt, credential);
  httplib::Client client(req.scheme_host_port);
  client.set_connection_timeout(std::min(config.timeout_seconds, 30), 0);
  client.set_read_timeout(config.timeout_seconds, 0);
  client.set_write_timeout(config.timeout_seconds, 0);
  httplib::Headers headers;
  for (const auto& [k, v] : req.headers)
    if (k != "Content-Type") headers.emplace(k, v);
  auto res = client.Post(req.path, headers, req.body, "application/json");
  if (!res) {
    BackendReply r;
    r.status = 0;
    const auto err = res.error();
    r.timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    r.body = httplib::to_string(err);
    return r;
  }
  return parse_response(config.api, res->status, res->body);
}

// ---------------------------------------------------------------------------
// Mock

const std::vector<MockBackend::Rule>& MockBackend::rules_for(const std::filesystem::path& dir) {
  std::lock_guard lock(mu_);
  auto it = rules_.find(dir);
  if (it != rules_.end()) return it->second;
  std::vector<Rule> rules;
  const auto file = dir / "rules.json";
  if (std::filesystem::exists(file)) {
    const json j = json::parse(text::read_file(file));
    for (const auto& jr : j.at("rules")) {
      Rule r;
      for (const auto& m : jr.value("match", json::array())) r.match.push_back(m.get<std::string>());
      r.task_scope = jr.value("scope", std::string("all")) == "task";
      if (jr.contains("response_json")) {
        r.response = "```json\n" + jr.at("response_json").dump(2) + "\n```";
        if (jr.contains("preamble")) r.response = jr.at("preamble").get<std::string>() + "\n" + r.response;
      } else {
        r.response = jr.at("response").get<std::string>();
      }
      rules.push_back(std::move(r));
    }
  }
  return rules_.emplace(dir, std::move(rules)).first->second;
}

BackendReply MockBackend::send(const ProviderConfig& config, const Prompt& prompt, const std::string&) {
  BackendReply reply;
  const std::string key = cache_key(config, prompt);
  if (config.fixture_dir.empty()) {
    reply.status = 404;
    reply.body = "mock provider '" + config.name + "' has no fixture_dir";
    return reply;
  }
  const std::filesystem::path dir(config.fixture_dir);
  const auto keyed = dir / key;
  if (std::filesystem::exists(keyed)) {
    reply.text = CacheEntry::from_json(json::parse(text::read_file(keyed))).response_text;
    reply.metadata = R"({"mock":"keyed"})";
    return reply;
  }
  const auto task_pos = prompt.user.rfind(kTaskMarker);
  const std::string_view task =
      task_pos == std::string::npos ? std::string_view(prompt.user) : std::string_view(prompt.user).substr(task_pos);
  const std::string whole = prompt.canonical();
  for (const auto& rule : rules_for(dir)) {
    const std::string_view scope = rule.task_scope ? task : std::string_view(whole);
    const bool hit = std::all_of(rule.match.begin(), rule.match.end(),
                                 [&](const std::string& m) { return scope.find(m) != std::string_view::npos; });
    if (hit) {
      reply.text = rule.response;
      reply.metadata = R"({"mock":"rule"})";
      return reply;
    }
  }
  reply.status = 404;
  reply.body = "no mock fixture for key " + key;
  return reply;
}

}  // namespace histolens::providers
