#pragma once

#include <functional>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "plvoi/session.hpp"

namespace plvoi {

/// HTTP routes over a SessionManager. Every body is JSON; failures answer
/// `{"error": code, "detail": text}`.
class Service {
 public:
  explicit Service(SessionManager& sessions) : sessions_(sessions) {}

  void install(httplib::Server& server) {
    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, 201, [&] { return sessions_.create(body_of(req)); });
    });
    server.Get("/sessions/:id/state", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return sessions_.state(req.path_params.at("id")); });
    });
    server.Get("/sessions/:id/whatif", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return sessions_.whatif(req.path_params.at("id")); });
    });
    server.Post("/sessions/:id/observe", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return sessions_.observe(req.path_params.at("id"), body_of(req)); });
    });
    server.Get("/sessions/:id/plan", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] { return sessions_.plan(req.path_params.at("id")); });
    });
    server.Delete("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      handle(res, 200, [&] {
        const auto& id = req.path_params.at("id");
        sessions_.remove(id);
        return ordered_json{{"id", id}, {"deleted", true}};
      });
    });
  }

 private:
  static nlohmann::json body_of(const httplib::Request& req) {
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw bad_request("request body is not valid JSON");
    return j;
  }

  static void reply(httplib::Response& res, int status, const ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void handle(httplib::Response& res, int ok, const std::function<ordered_json()>& f) {
    try {
      reply(res, ok, f());
    } catch (const ServiceError& e) {
      reply(res, e.status(), {{"error", e.code()}, {"detail", e.what()}});
    } catch (const Error& e) {
      auto se = to_service_error(e);
      reply(res, se.status(), {{"error", se.code()}, {"detail", se.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", "internal"}, {"detail", e.what()}});
    }
  }

  SessionManager& sessions_;
};

}  // namespace plvoi
