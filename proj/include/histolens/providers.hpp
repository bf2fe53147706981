#pragma once

// Thin adapters for the providers' published chat-completion shapes, plus the
// fixture-replaying mock.

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "histolens/gateway.hpp"

namespace histolens::providers {

struct HttpRequest {
  std::string scheme_host_port;  // "https://api.openai.com"
  std::string path;              // "/v1/chat/completions?..."
  std::map<std::string, std::string> headers;
  std::string body;
};

/// Default endpoint for an api shape when the config leaves it empty.
std::string default_endpoint(const std::string& api);

HttpRequest build_request(const ProviderConfig& config, const Prompt& prompt, const std::string& credential);

/// Extracts the assistant text from a 2xx body. Provider-reported errors
/// embedded in a 200 body (ERNIE) are mapped to an HTTP-like status.
BackendReply parse_response(const std::string& api, int status, const std::string& body);

class HttpChatBackend : public ChatBackend {
 public:
  BackendReply send(const ProviderConfig& config, const Prompt& prompt, const std::string& credential) override;
};

/// Replays recorded responses: first `<fixture_dir>/<cache key>` (a cache
/// entry file), then the ordered substring rules in `<fixture_dir>/rules.json`.
/// Unknown requests yield a 404 reply.
class MockBackend : public ChatBackend {
 public:
  BackendReply send(const ProviderConfig& config, const Prompt& prompt, const std::string& credential) override;

 private:
  struct Rule {
    std::vector<std::string> match;
    bool task_scope = false;
    std::string response;
  };
  const std::vector<Rule>& rules_for(const std::filesystem::path& dir);

  std::mutex mu_;
  std::map<std::filesystem::path, std::vector<Rule>> rules_;
};

}  // namespace histolens::providers
