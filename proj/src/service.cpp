#include "talkdep/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <thread>

namespace talkdep {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), Json{{"code", to_string(code)}, {"message", message}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) throw Error(ErrorCode::parse_error, "request body must be a JSON object");
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::parse_error, "request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("invalid JSON: ") + e.what());
  }
}

std::string required_string(const Json& body, const char* key) {
  if (!body.contains(key) || !body.at(key).is_string()) {
    throw Error(ErrorCode::invalid_argument, std::string("'") + key + "' must be a string");
  }
  return body.at(key).get<std::string>();
}

Json persona_summary(const PersonaProfile& p, const std::optional<std::string>& accepted) {
  Json symptoms = Json::array();
  for (const auto& s : p.key_symptoms) symptoms.push_back(s.label());
  return Json{{"persona_id", p.persona_id},
              {"name", p.name},
              {"age", p.age},
              {"gender", p.gender},
              {"bdi_total", p.bdi_total},
              {"severity_band", to_string(p.severity_band)},
              {"key_symptoms", symptoms},
              {"accepted_run", accepted ? Json(*accepted) : Json(nullptr)},
              {"has_accepted_context", accepted.has_value()}};
}

Json transcript_view(const Session& s, const DialogueTranscript& t) {
  Json turns = Json::array();
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    turns.push_back({{"idx", i}, {"speaker", to_string(t.turns[i].speaker)}, {"text", t.turns[i].text}});
  }
  Json j = session_summary(s);
  j["transcript_id"] = t.transcript_id;
  j["purpose"] = t.purpose.to_string();
  j["turns"] = turns;
  return j;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument:
    case ErrorCode::out_of_range:
    case ErrorCode::parse_error: return 400;
    case ErrorCode::not_found: return 404;
    case ErrorCode::duplicate_id:
    case ErrorCode::conflict:
    case ErrorCode::precondition: return 409;
    case ErrorCode::validation_error: return 422;
    case ErrorCode::timeout: return 504;
    case ErrorCode::transport:
    case ErrorCode::backend_rejected:
    case ErrorCode::malformed_payload:
    case ErrorCode::protocol_error: return 502;
    case ErrorCode::io_error: return 500;
  }
  return 500;
}

struct Service::Impl {
  App& app;
  httplib::Server server;
  std::thread thread;

  explicit Impl(App& a) : app(a) { routes(); }

  template <typename Fn>
  httplib::Server::Handler guarded(Fn fn) {
    return [this, fn](const httplib::Request& req, httplib::Response& res) {
      const auto& token = app.config().service_token;
      if (!token.empty() && req.get_header_value("Authorization") != "Bearer " + token) {
        send_json(res, 401, Json{{"code", "unauthorized"}, {"message", "missing or wrong bearer token"}});
        return;
      }
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, ErrorCode::invalid_argument, e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::io_error, e.what());
      }
    };
  }

  void routes() {
    server.Get("/api/personas", guarded([this](const httplib::Request&, httplib::Response& res) {
      Json out = Json::array();
      for (const auto& p : app.roster()) out.push_back(persona_summary(p, app.runs().accepted_run(p.persona_id)));
      send_json(res, 200, out);
    }));

    server.Post("/api/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      const bool profile_only = body.value("allow_profile_only", false);
      const Session s = app.sessions().create_session(required_string(body, "persona_id"), profile_only);
      send_json(res, 201, session_summary(s));
    }));

    server.Post(R"(/api/sessions/([^/]+)/turns)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const Json body = parse_body(req);
      const auto result = app.sessions().post_turn(req.matches[1], required_string(body, "text"));
      Json flags = Json::array();
      for (const auto& f : result.flags) flags.push_back(to_json(f));
      send_json(res, 200, Json{{"reply", to_json(result.reply)}, {"flags", flags}});
    }));

    server.Post(R"(/api/sessions/([^/]+)/close)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      app.sessions().close(req.matches[1]);
      send_json(res, 200, session_summary(app.sessions().get(req.matches[1])));
    }));

    server.Get(R"(/api/sessions/([^/]+)/transcript)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const auto t = app.sessions().export_transcript(req.matches[1]);
                 if (req.get_param_value("format") == "jsonl") {
                   res.status = 200;
                   res.set_content(transcript_to_jsonl(t), "application/x-ndjson");
                   return;
                 }
                 send_json(res, 200, transcript_view(app.sessions().get(req.matches[1]), t));
               }));

    server.Post("/api/forms", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto result = app.forms().record(form_from_json(parse_body(req)));
      send_json(res, result.replaced ? 200 : 201, Json{{"form_id", result.form_id}, {"replaced", result.replaced}});
    }));

    server.Get("/api/reports/forms", guarded([this](const httplib::Request&, httplib::Response& res) {
      if (app.forms().forms().empty()) {
        send_json(res, 200, Json{{"forms_count", 0}, {"persona_means", Json::object()}, {"aggregates", nullptr}});
        return;
      }
      auto [run_id, report] = app.forms_report();
      report["run_id"] = run_id;
      send_json(res, 200, report);
    }));

    server.Get(R"(/api/reports/bench/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string run_id = req.matches[1];
      const bool well_formed =
          run_id.rfind("bench-", 0) == 0 &&
          std::all_of(run_id.begin(), run_id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-'; });
      auto report = well_formed ? app.runs().load_report(run_id) : std::nullopt;
      if (!report) throw Error(ErrorCode::not_found, "no bench run '" + run_id + "'");
      send_json(res, 200, *report);
    }));

    server.Get("/api/flags", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const bool unresolved = req.get_param_value("unresolved") == "1" || req.get_param_value("unresolved") == "true";
      Json out = Json::array();
      for (const auto& f : app.flags().list(unresolved)) out.push_back(to_json(f));
      send_json(res, 200, out);
    }));

    server.Post(R"(/api/flags/([^/]+)/resolution)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const Json body = parse_body(req);
                  Resolution r{required_string(body, "reviewer"), required_string(body, "decision"),
                               body.value("note", std::string()), ""};
                  send_json(res, 200, to_json(app.flags().resolve(req.matches[1], std::move(r))));
                }));

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) {
        const std::string code = res.status == 404 ? "not_found" : "http_error";
        res.set_content(Json{{"code", code}, {"message", "HTTP " + std::to_string(res.status)}}.dump(),
                        "application/json");
      }
    });
  }
};

Service::Service(App& app) : impl_(std::make_unique<Impl>(app)) {}

Service::~Service() { stop(); }

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw Error(ErrorCode::io_error, "cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::io_error, "cannot listen on " + host + ":" + std::to_string(port));
  }
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace talkdep
