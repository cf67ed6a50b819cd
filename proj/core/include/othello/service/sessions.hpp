#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "othello/board.hpp"
#include "othello/evaluation.hpp"
#include "othello/notation.hpp"
#include "othello/rng.hpp"
#include "othello/service/registry.hpp"

namespace othello::service {

// An Error that carries structured detail for the {code, message, detail}
// response body.
class ServiceError : public Error {
 public:
  ServiceError(ErrorCode code, const std::string& message, nlohmann::ordered_json detail)
      : Error(code, message), detail_(std::move(detail)) {}
  const nlohmann::ordered_json& detail() const noexcept { return detail_; }

 private:
  nlohmann::ordered_json detail_;
};

enum class Mode { kHumanVsModel, kReplay };
enum class MoveSource { kHuman, kModelRaw, kModelFallback, kAutoPass, kRecord };
enum class Policy { kRaw, kResample, kLegalMask };
enum class Direction { kForward, kBack };

std::string_view to_string(Mode m);
std::string_view to_string(MoveSource s);
std::string_view to_string(Policy p);
std::string_view to_string(Direction d);
// Throw Malformed for unknown names.
Mode mode_from_string(std::string_view s);
MoveSource move_source_from_string(std::string_view s);
Policy policy_from_string(std::string_view s);
Direction direction_from_string(std::string_view s);
Player player_from_string(std::string_view s);

struct LoggedMove {
  Move move;
  MoveSource source;
  Player player;
};

// A sampled token the engine rejected. kind is OccupiedSquare or NoFlank
// for squares, BadPass for a pass while placements exist and BadToken for
// BOS/EOS.
struct IllegalProposal {
  int ply = 0;
  std::string token;
  Failure kind = Failure::kNone;
};

struct ReplayScript {
  // Text the session was created from.
  std::string source_text;
  bool from_record = false;
  // Moves that replay legally, passes included.
  std::vector<Move> moves;
  // frame_end[k]: moves consumed after k placements, trailing forced passes
  // included.
  std::vector<std::size_t> frame_end;
  LegalityReport report;
  int cursor = 0;
  int placements() const { return static_cast<int>(frame_end.size()) - 1; }
};

struct Session {
  std::string id;
  Mode mode = Mode::kHumanVsModel;
  std::optional<std::string> model_id;
  // nullopt: the model plays both colours.
  std::optional<Player> human_color;
  Position position = initial_position();
  std::vector<LoggedMove> move_log;
  std::optional<GameRecord> loaded_record;
  std::vector<IllegalProposal> event_log;
  std::optional<ReplayScript> replay;
  std::uint64_t seed = 0;
  Rng rng;
};

struct CreateRequest {
  Mode mode = Mode::kHumanVsModel;
  std::optional<std::string> model_id;
  std::optional<Player> human_color;
  // Replay source: a PGN-like archive record or a raw transcript.
  std::optional<std::string> record;
  std::optional<std::string> transcript;
  std::uint64_t seed = 0;
};

struct ModelMoveRequest {
  Policy policy = Policy::kLegalMask;
  int k = 3;  // Resample attempts
  double temperature = 1.0;
  int top_k = 0;
  std::optional<int> expected_ply;
};

struct ModelMoveOutcome {
  std::optional<Move> move;
  bool halted = false;
  std::vector<IllegalProposal> events;
  Session state;
};

struct AuditResult {
  bool consistent = false;
  int plies = 0;
};

struct SessionOptions {
  // When set, every session is written to DIR/<id>.json after each change
  // and sessions found there are restored at startup.
  std::optional<std::filesystem::path> snapshot_dir;
};

// Owns all sessions. Calls on distinct sessions run in parallel; calls on
// one session are serialised by a per-session mutex. Mutating calls accept
// the ply (cursor in Replay mode) the caller last saw and fail with Conflict
// if another request got there first.
class SessionManager {
 public:
  explicit SessionManager(const ModelRegistry& models, SessionOptions opts = {});

  // Throws UnknownModel, Malformed, InvalidConfig.
  std::string create(const CreateRequest& req);
  // Throws UnknownSession.
  Session state(const std::string& id) const;
  // Throws UnknownSession, WrongMode, NotYourTurn, AtEnd, Conflict,
  // IllegalMove (detail.kind = OccupiedSquare | NoFlank | BadPass).
  Session human_move(const std::string& id, std::string_view move, bool takeover = false,
                     std::optional<int> expected_ply = std::nullopt);
  // Throws UnknownSession, WrongMode, NotModelsTurn, AtEnd, Conflict.
  ModelMoveOutcome model_move(const std::string& id, const ModelMoveRequest& req);
  // Throws UnknownSession, WrongMode, AtStart, AtEnd, IllegalAhead, Conflict.
  Session replay_step(const std::string& id, Direction dir,
                      std::optional<int> expected_cursor = std::nullopt);
  AuditResult audit(const std::string& id) const;
  std::vector<std::string> ids() const;
  std::size_t size() const;

 private:
  struct Slot {
    mutable std::mutex mutex;
    Session session;
  };
  std::shared_ptr<Slot> find(const std::string& id) const;
  void persist(const Session& s) const;
  void restore_snapshots();

  const ModelRegistry& models_;
  SessionOptions opts_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
};

// {id, mode, model_id, human_color, board, legal, terminal, winner, timeline,
//  move_log, event_log[, replay]}
nlohmann::ordered_json to_json(const Session& s);
nlohmann::ordered_json to_json(const IllegalProposal& p);
nlohmann::ordered_json to_json(const ModelMoveOutcome& o);
nlohmann::ordered_json to_json(const AuditResult& a);

// Full persisted form, including the RNG state.
nlohmann::ordered_json snapshot_json(const Session& s);

}  // namespace othello::service
