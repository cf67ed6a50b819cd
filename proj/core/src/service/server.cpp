#include "othello/service/server.hpp"

#include <httplib.h>

namespace othello::service {

namespace {

using Json = nlohmann::json;

template <class T>
std::optional<T> optional_field(const Json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return std::nullopt;
  return body.at(key).get<T>();
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  Json body;
  try {
    body = Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw ServiceError(ErrorCode::kMalformed, "request body is not JSON", {{"reason", e.what()}});
  }
  if (!body.is_object()) {
    throw ServiceError(ErrorCode::kMalformed, "request body must be a JSON object", {});
  }
  return body;
}

void reply(httplib::Response& res, const nlohmann::ordered_json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, ErrorCode code, const std::string& message,
                 const nlohmann::ordered_json& detail) {
  nlohmann::ordered_json body;
  body["code"] = to_string(code);
  body["message"] = message;
  body["detail"] = detail.is_null() ? nlohmann::ordered_json::object() : detail;
  reply(res, body, http_status(code));
}

// Runs a route body and turns exceptions into error replies.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      reply_error(res, e.code(), e.what(), e.detail());
    } catch (const IllegalMoveError& e) {
      reply_error(res, e.code(), e.what(), {{"kind", to_string(e.kind())}});
    } catch (const Error& e) {
      reply_error(res, e.code(), e.what(), {});
    } catch (const Json::exception& e) {
      reply_error(res, ErrorCode::kMalformed, "request field has the wrong type",
                  {{"reason", e.what()}});
    } catch (const std::exception& e) {
      nlohmann::ordered_json body{{"code", "Internal"}, {"message", e.what()}, {"detail", nlohmann::ordered_json::object()}};
      reply(res, body, 500);
    }
  };
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownModel:
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownJob:
      return 404;
    case ErrorCode::kNotYourTurn:
    case ErrorCode::kNotModelsTurn:
    case ErrorCode::kWrongMode:
    case ErrorCode::kAtStart:
    case ErrorCode::kAtEnd:
    case ErrorCode::kIllegalAhead:
    case ErrorCode::kConflict:
      return 409;
    case ErrorCode::kIllegalMove:
    case ErrorCode::kOccupiedSquare:
      return 422;
    case ErrorCode::kIo:
    case ErrorCode::kNonFinite:
    case ErrorCode::kCorruptCheckpoint:
      return 500;
    default:
      return 400;
  }
}

struct Server::Impl {
  Impl(SessionManager& s, JobManager& j, const ModelRegistry& m)
      : sessions(s), jobs(j), models(m) {}
  SessionManager& sessions;
  JobManager& jobs;
  const ModelRegistry& models;
  httplib::Server http;
};

Server::Server(SessionManager& sessions, JobManager& jobs, const ModelRegistry& models,
               ServerOptions opts)
    : impl_(std::make_unique<Impl>(sessions, jobs, models)) {
  httplib::Server& http = impl_->http;
  Impl* s = impl_.get();

  http.Post("/sessions", guarded([s](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    CreateRequest cr;
    cr.mode = mode_from_string(body.value("mode", std::string("HumanVsModel")));
    cr.model_id = optional_field<std::string>(body, "model_id");
    if (const auto color = optional_field<std::string>(body, "human_color")) {
      cr.human_color = player_from_string(*color);
    }
    cr.record = optional_field<std::string>(body, "record");
    cr.transcript = optional_field<std::string>(body, "transcript");
    cr.seed = body.value("seed", std::uint64_t{0});
    const std::string id = s->sessions.create(cr);
    reply(res, {{"id", id}, {"state", to_json(s->sessions.state(id))}}, 201);
  }));

  http.Get("/sessions/:id/state", guarded([s](const httplib::Request& req, httplib::Response& res) {
    reply(res, to_json(s->sessions.state(req.path_params.at("id"))));
  }));

  http.Post("/sessions/:id/human-move",
            guarded([s](const httplib::Request& req, httplib::Response& res) {
              const Json body = parse_body(req);
              const auto move = optional_field<std::string>(body, "move");
              if (!move) throw ServiceError(ErrorCode::kMalformed, "field 'move' is required", {});
              reply(res, to_json(s->sessions.human_move(req.path_params.at("id"), *move,
                                                        body.value("takeover", false),
                                                        optional_field<int>(body, "expected_ply"))));
            }));

  http.Post("/sessions/:id/model-move",
            guarded([s](const httplib::Request& req, httplib::Response& res) {
              const Json body = parse_body(req);
              ModelMoveRequest mr;
              mr.policy = policy_from_string(body.value("policy", std::string("LegalMask")));
              mr.k = body.value("k", 3);
              mr.temperature = body.value("temperature", 1.0);
              mr.top_k = body.value("top_k", 0);
              mr.expected_ply = optional_field<int>(body, "expected_ply");
              reply(res, to_json(s->sessions.model_move(req.path_params.at("id"), mr)));
            }));

  http.Post("/sessions/:id/replay-step",
            guarded([s](const httplib::Request& req, httplib::Response& res) {
              const Json body = parse_body(req);
              const Direction dir =
                  direction_from_string(body.value("direction", std::string("forward")));
              reply(res, to_json(s->sessions.replay_step(
                             req.path_params.at("id"), dir,
                             optional_field<int>(body, "expected_cursor"))));
            }));

  http.Get("/sessions/:id/audit", guarded([s](const httplib::Request& req, httplib::Response& res) {
    reply(res, to_json(s->sessions.audit(req.path_params.at("id"))));
  }));

  http.Post("/jobs/generate", guarded([s](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    GenerateParams p;
    p.n = body.value("n", 200);
    p.temperature = body.value("temperature", 1.0);
    p.top_k = body.value("top_k", 0);
    p.seed = body.value("seed", std::uint64_t{0});
    const auto model = optional_field<std::string>(body, "model_id");
    if (!model) throw ServiceError(ErrorCode::kUnknownModel, "field 'model_id' is required", {});
    p.model_id = *model;
    const std::string id = s->jobs.submit(p);
    reply(res, to_json(s->jobs.view(id)), 202);
  }));

  http.Get("/jobs/:id", guarded([s](const httplib::Request& req, httplib::Response& res) {
    const bool transcripts = req.get_param_value("transcripts") == "1";
    reply(res, to_json(s->jobs.view(req.path_params.at("id")), transcripts));
  }));

  http.Get("/models", guarded([s](const httplib::Request&, httplib::Response& res) {
    reply(res, {{"models", s->models.to_json()}});
  }));

  if (opts.static_dir) {
    if (!http.set_mount_point("/", opts.static_dir->string())) {
      throw Error(ErrorCode::kIo, "static directory not found: " + opts.static_dir->string());
    }
  }
}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int Server::bind_to_any_port(const std::string& host) {
  return impl_->http.bind_to_any_port(host);
}

bool Server::listen_after_bind() { return impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

bool Server::is_running() const { return impl_->http.is_running(); }

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

}  // namespace othello::service
