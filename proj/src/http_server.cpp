#include <atomic>
#include <cstdlib>
#include <thread>

// Eigen must be parsed before httplib pulls in <resolv.h> (its _res macro).
#include "handshake/service.hpp"

#include <httplib.h>

namespace handshake {

using nlohmann::json;

ServerSettings server_settings_from_env() {
  ServerSettings s;
  if (const char* bind = std::getenv("HANDSHAKE_BIND")) {
    const std::string b = bind;
    const auto colon = b.rfind(':');
    if (colon == std::string::npos) throw ConfigInvalid("HANDSHAKE_BIND must be host:port");
    s.host = b.substr(0, colon);
    try {
      s.port = std::stoi(b.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigInvalid("HANDSHAKE_BIND has a bad port");
    }
    if (s.port < 0 || s.port > 65535) throw ConfigInvalid("HANDSHAKE_BIND has a bad port");
  }
  if (const char* origin = std::getenv("HANDSHAKE_CORS_ORIGIN")) s.cors_origin = origin;
  return s;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::exception& e) {
  const auto [status, name] = http_status_for(e);
  send_json(res, status, {{"error", name}, {"message", e.what()}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json(nullptr);
  return json::parse(req.body);
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const std::exception& e) {
      send_error(res, e);
    }
  };
}

}  // namespace

void serve_http(SessionService& service, const ServerSettings& settings,
                const std::function<void(int port)>& ready, const std::function<bool()>& stop) {
  httplib::Server server;
  const std::string origin = settings.cors_origin;
  server.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", origin);
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 201, service.create_session(parse_body(req)));
              }));
  server.Get(R"(/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.get_state(req.matches[1]));
             }));
  server.Get(R"(/sessions/([^/]+)/query)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.get_query(req.matches[1]));
             }));
  server.Post(R"(/sessions/([^/]+)/choice)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, service.post_choice(req.matches[1], parse_body(req)));
              }));
  server.Post(R"(/sessions/([^/]+)/satisfaction)",
              guarded([&](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, service.post_satisfaction(req.matches[1], parse_body(req)));
              }));
  server.Get(R"(/sessions/([^/]+)/belief)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send_json(res, 200, service.get_belief(req.matches[1]));
             }));
  server.Get(R"(/sessions/([^/]+)/report)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               res.status = 200;
               res.set_content(service.get_report(req.matches[1]), "application/json");
             }));

  int port = settings.port;
  if (port == 0) {
    port = server.bind_to_any_port(settings.host);
  } else if (!server.bind_to_port(settings.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + settings.host + ":" + std::to_string(settings.port));

  std::atomic<bool> finished{false};
  std::thread helper([&] {
    while (!server.is_running()) {
      if (finished) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    if (ready) ready(port);
    if (!stop) return;
    while (!finished && !stop()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.stop();
  });
  server.listen_after_bind();
  finished = true;
  helper.join();
}

}  // namespace handshake
