#pragma once

#include <memory>
#include <string>

#include "histolens/errors.hpp"
#include "histolens/tutor.hpp"

namespace histolens {

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Routes one request to the tutor service. Errors come back as
/// `{"code": ..., "message": ...}` with a 4xx/5xx status.
///
///   POST /sessions                {dataset_ref, seed}
///   GET  /sessions/{id}/next
///   POST /sessions/{id}/guess     {statement_id, guess}
///   GET  /sessions/{id}/progress
///   GET  /datasets
///   GET  /graph
///   GET  /map
ApiResponse handle_request(TutorService& service, const std::string& method, const std::string& path,
                           const std::string& body);

int http_status_for(ErrorCode code);

/// Thin cpp-httplib wrapper around handle_request.
class TutorServer {
 public:
  explicit TutorServer(TutorService& service);
  ~TutorServer();

  /// Binds and serves until stop(); returns false if binding failed.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it (or -1); call serve() next.
  int bind_any(const std::string& host);
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace histolens
