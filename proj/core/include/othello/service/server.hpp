#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "othello/error.hpp"
#include "othello/service/jobs.hpp"
#include "othello/service/registry.hpp"
#include "othello/service/sessions.hpp"

namespace othello::service {

// HTTP status used for each error code in {code, message, detail} replies.
int http_status(ErrorCode code);

struct ServerOptions {
  // Served under / when set (the built UI bundle).
  std::optional<std::filesystem::path> static_dir;
};

// JSON-over-HTTP front end:
//   POST /sessions                      GET  /sessions/{id}/state
//   POST /sessions/{id}/human-move      POST /sessions/{id}/model-move
//   POST /sessions/{id}/replay-step     GET  /sessions/{id}/audit
//   POST /jobs/generate                 GET  /jobs/{id}
//   GET  /models
class Server {
 public:
  Server(SessionManager& sessions, JobManager& jobs, const ModelRegistry& models,
         ServerOptions opts = {});
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Blocks until stop(). Returns false if the port cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and returns it (-1 on failure); then call
  // listen_after_bind(), usually on another thread.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool is_running() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace othello::service
