#pragma once

#include <string>

#include "httplib.h"
#include "whatif/api.hpp"

namespace whatif {

/// Binds the API handlers to an HTTP server. All responses are JSON and
/// carry permissive CORS headers for the browser client.
inline void mount_routes(httplib::Server& server, api::Api& api) {
  using httplib::Request;
  using httplib::Response;

  auto send = [](Response& res, const api::Response& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  auto num = [](const Request& req, std::size_t i) { return std::stoll(req.matches[i].str()); };

  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  server.Options(R"(.*)", [](const Request&, Response& res) { res.status = 204; });

  server.Post("/sessions", [&api, send](const Request& req, Response& res) {
    send(res, api.create_session(req.body));
  });
  server.Post("/sessions/import", [&api, send](const Request& req, Response& res) {
    send(res, api.import_session(req.body));
  });
  server.Get(R"(/sessions/([^/]+)/tree)", [&api, send](const Request& req, Response& res) {
    send(res, api.get_tree(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/export)", [&api, send](const Request& req, Response& res) {
    send(res, api.export_session(req.matches[1]));
  });
  server.Get(R"(/sessions/([^/]+)/states/(\d+))", [&api, send, num](const Request& req, Response& res) {
    send(res, api.get_state(req.matches[1], num(req, 2)));
  });
  server.Delete(R"(/sessions/([^/]+)/states/(\d+))", [&api, send, num](const Request& req, Response& res) {
    send(res, api.delete_state(req.matches[1], num(req, 2)));
  });
  server.Post(R"(/sessions/([^/]+)/states/(\d+)/modifications)",
              [&api, send, num](const Request& req, Response& res) {
                send(res, api.post_modification(req.matches[1], num(req, 2), req.body));
              });
  server.Get(R"(/sessions/([^/]+)/states/(\d+)/roads/(\d+)/od)",
             [&api, send, num](const Request& req, Response& res) {
               send(res, api.get_od(req.matches[1], num(req, 2), num(req, 3)));
             });
  server.Post(R"(/sessions/([^/]+)/indicators)", [&api, send](const Request& req, Response& res) {
    send(res, api.post_indicators(req.matches[1], req.body));
  });
  server.Get(R"(/jobs/([^/]+))", [&api, send](const Request& req, Response& res) {
    send(res, api.poll_job(req.matches[1]));
  });

  server.set_error_handler([](const Request&, Response& res) {
    if (res.body.empty()) res.set_content(R"({"error":"not found"})", "application/json");
  });
}

}  // namespace whatif
