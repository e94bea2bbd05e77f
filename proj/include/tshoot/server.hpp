#pragma once

#include <memory>
#include <string>

#include "tshoot/session.hpp"

namespace tshoot {

// HTTP status for an error code.
int http_status(ErrorCode code);
// {"type", "title", "status", "code", "detail"} plus "violations" for
// invalid models.
Json problem_json(const Error& e);

/// JSON API over a SessionStore:
///   GET  /health
///   GET  /networks
///   POST /sessions
///   GET  /sessions/{id}
///   GET  /sessions/{id}/recommendation
///   POST /sessions/{id}/events
///   GET  /sessions/{id}/history
class HttpServer {
 public:
  explicit HttpServer(SessionStore& store);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws io_error.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tshoot
