#include "tshoot/server.hpp"

#include "httplib.h"

namespace tshoot {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::conflict:
    case ErrorCode::not_active: return 409;
    case ErrorCode::invalid_model:
    case ErrorCode::contradiction:
    case ErrorCode::impossible_evidence:
    case ErrorCode::model_exhausted: return 422;
    case ErrorCode::io_error:
    case ErrorCode::inconsistent_model: return 500;
    default: return 400;
  }
}

Json problem_json(const Error& e) {
  Json p{{"type", "about:blank"},
         {"title", to_string(e.code())},
         {"status", http_status(e.code())},
         {"code", to_string(e.code())},
         {"detail", e.what()}};
  if (auto* im = dynamic_cast<const InvalidModel*>(&e)) p["violations"] = violations_json(im->violations());
  return p;
}

struct HttpServer::Impl {
  SessionStore& store;
  httplib::Server server;

  explicit Impl(SessionStore& s) : store(s) {}

  static void send(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  // Runs a handler, turning exceptions into problem objects.
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const Error& e) {
      send(res, http_status(e.code()), problem_json(e));
    } catch (const Json::exception& e) {
      send(res, 400, problem_json(Error(ErrorCode::parse_error, e.what())));
    } catch (const std::exception& e) {
      send(res, 500, problem_json(Error(ErrorCode::io_error, e.what())));
    }
  }

  static Json body_of(const httplib::Request& req) {
    try {
      return Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::parse_error, std::string("request body is not JSON: ") + e.what());
    }
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      send(res, 200, {{"status", "ok"}});
    });
    server.Get("/networks", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, {{"networks", store.networks()}}); });
    });
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 201, store.create(body_of(req))); });
    });
    server.Get(R"(/sessions/([0-9a-f]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send(res, 200, store.summary(req.matches[1])); });
               });
    server.Get(R"(/sessions/([0-9a-f]+)/recommendation)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send(res, 200, store.recommendation(req.matches[1])); });
               });
    server.Get(R"(/sessions/([0-9a-f]+)/history)",
               [this](const httplib::Request& req, httplib::Response& res) {
                 guarded(res, [&] { send(res, 200, store.history(req.matches[1])); });
               });
    server.Post(R"(/sessions/([0-9a-f]+)/events)",
                [this](const httplib::Request& req, httplib::Response& res) {
                  guarded(res, [&] { send(res, 200, store.apply(req.matches[1], body_of(req))); });
                });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      const ErrorCode code = res.status == 404 ? ErrorCode::not_found : ErrorCode::invalid_argument;
      Json p = problem_json(Error(code, "no such route"));
      p["status"] = res.status;
      res.set_content(p.dump(), "application/json");
    });
  }
};

HttpServer::HttpServer(SessionStore& store) : impl_(std::make_unique<Impl>(store)) {
  impl_->routes();
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  int bound = -1;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (impl_->server.bind_to_port(host, port)) {
    bound = port;
  }
  if (bound < 0)
    throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

}  // namespace tshoot
