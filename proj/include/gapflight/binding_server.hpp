#pragma once

#include <functional>
#include <mutex>
#include <string>

#include "gapflight/batch.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

namespace gapflight {

/// Serves a BatchBinding over local HTTP: POST /spec, /reset, /step with
/// JSON bodies. Errors come back as status 400 with {"error": message}.
class BindingServer {
 public:
  explicit BindingServer(BatchBinding& binding) : binding_(binding) {
    route("/spec", [this](const Json&) { return binding_.spec(); });
    route("/reset", [this](const Json& req) { return binding_.reset(req); });
    route("/step", [this](const Json& req) { return binding_.step(req); });
  }

  /// Binds to host:port (port 0 picks a free one) and returns the port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }

  /// Blocks until stop() is called.
  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  void route(const std::string& path, std::function<Json(const Json&)> handler) {
    server_.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mutex_);
      try {
        const Json body = req.body.empty() ? Json::object() : Json::parse(req.body);
        res.set_content(handler(body).dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(Json{{"error", e.what()}}.dump(), "application/json");
      }
    });
  }

  BatchBinding& binding_;
  httplib::Server server_;
  std::mutex mutex_;
};

/// POSTs a JSON body and returns the parsed reply; throws on transport
/// failure or a non-200 status.
inline Json post_json(const std::string& host, int port, const std::string& path, const Json& body) {
  httplib::Client cli(host, port);
  cli.set_read_timeout(60, 0);
  auto res = cli.Post(path, body.dump(), "application/json");
  if (!res) throw std::runtime_error("request to " + host + ":" + std::to_string(port) + path + " failed");
  Json reply = Json::parse(res->body);
  if (res->status != 200)
    throw std::runtime_error(path + ": " + reply.value("error", "status " + std::to_string(res->status)));
  return reply;
}

}  // namespace gapflight
