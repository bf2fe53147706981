#include "histolens/tutor_http.hpp"

#include <httplib.h>

#include <regex>

#include "histolens/errors.hpp"
#include "histolens/log.hpp"
#include "histolens/text.hpp"

namespace histolens {

using nlohmann::json;
using nlohmann::ordered_json;

int http_status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownDataset:
    case ErrorCode::FileNotFound: return 404;
    case ErrorCode::SessionComplete:
    case ErrorCode::OutOfOrderGuess: return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::LabelOutOfVocabulary:
    case ErrorCode::MalformedStructure: return 400;
    default: return 500;
  }
}

namespace {

ApiResponse ok(const ordered_json& j, int status = 200) { return {status, "application/json", j.dump()}; }

ApiResponse fail(int status, std::string_view code, const std::string& message) {
  return {status, "application/json", ordered_json{{"code", code}, {"message", message}}.dump()};
}

ApiResponse serve_file(const std::filesystem::path& path, const char* content_type, const char* what) {
  if (path.empty() || !std::filesystem::is_regular_file(path))
    return fail(404, error_code_name(ErrorCode::FileNotFound), std::string("no ") + what + " export available");
  return {200, content_type, text::read_file(path)};
}

json parse_body(const std::string& body) {
  json j = json::parse(body.empty() ? "{}" : body, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return j;
}

std::uint64_t parse_seed(const json& j) {
  if (!j.contains("seed")) return 0;
  const auto& s = j.at("seed");
  if (s.is_number_unsigned()) return s.get<std::uint64_t>();
  if (s.is_number_integer() && s.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(s.get<std::int64_t>());
  throw Error(ErrorCode::InvalidArgument, "seed must be a non-negative integer");
}

std::string required_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw Error(ErrorCode::InvalidArgument, std::string("missing string field '") + key + "'");
  return j.at(key).get<std::string>();
}

ApiResponse route(TutorService& service, const std::string& method, const std::string& path, const std::string& body) {
  static const std::regex session_route(R"(^/sessions/([A-Za-z0-9_-]+)/(next|guess|progress)$)");
  std::smatch m;
  if (path == "/sessions") {
    if (method != "POST") return fail(405, "method-not-allowed", "use POST /sessions");
    const json j = parse_body(body);
    const auto s = service.create_session(required_string(j, "dataset_ref"), parse_seed(j));
    return ok({{"session_id", s.session_id}, {"dataset_ref", s.dataset_ref}, {"total", s.item_order.size()}}, 201);
  }
  if (std::regex_match(path, m, session_route)) {
    const std::string id = m[1];
    const std::string action = m[2];
    if (action == "guess") {
      if (method != "POST") return fail(405, "method-not-allowed", "use POST for guesses");
      const json j = parse_body(body);
      const Label guess = parse_label(required_string(j, "guess"));
      return ok(service.submit_guess(id, required_string(j, "statement_id"), guess).to_json());
    }
    if (method != "GET") return fail(405, "method-not-allowed", "use GET");
    if (action == "next") return ok(service.next_passage(id).to_json());
    return ok(service.session_progress(id).to_json());
  }
  if (method != "GET") return fail(405, "method-not-allowed", "use GET");
  if (path == "/datasets") {
    ordered_json list = ordered_json::array();
    for (const auto& ref : service.datasets().refs()) {
      const auto stats = dataset_stats(*service.datasets().get(ref));
      list.push_back({{"ref", ref},
                      {"n_total", stats.n_total},
                      {"n_confucian", stats.n_confucian},
                      {"n_legalist", stats.n_legalist}});
    }
    return ok({{"datasets", list}});
  }
  if (path == "/graph") return serve_file(service.options().graph_path, "application/json", "graph");
  if (path == "/map") return serve_file(service.options().map_path, "application/geo+json", "map");
  return fail(404, "not-found", "no route for " + method + " " + path);
}

}  // namespace

ApiResponse handle_request(TutorService& service, const std::string& method, const std::string& path,
                           const std::string& body) {
  try {
    return route(service, method, path, body);
  } catch (const Error& e) {
    return fail(http_status_for(e.code()), error_code_name(e.code()), e.what());
  } catch (const std::exception& e) {
    logger()->error("{} {}: {}", method, path, e.what());
    return fail(500, "internal-error", e.what());
  }
}

struct TutorServer::Impl {
  TutorService& service;
  httplib::Server server;

  explicit Impl(TutorService& s) : service(s) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      const ApiResponse r = handle_request(service, req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get(R"(/.*)", handler);
    server.Post(R"(/.*)", handler);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });
  }
};

TutorServer::TutorServer(TutorService& service) : impl_(std::make_unique<Impl>(service)) {}
TutorServer::~TutorServer() { stop(); }

bool TutorServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int TutorServer::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool TutorServer::serve() { return impl_->server.listen_after_bind(); }
void TutorServer::stop() { impl_->server.stop(); }
void TutorServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace histolens
