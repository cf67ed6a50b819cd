#include "othello/service/sessions.hpp"

#include <fstream>
#include <random>
#include <sstream>

#include "othello/corpus.hpp"
#include "othello/json_io.hpp"
#include "othello/lm/sampling.hpp"

namespace othello::service {

namespace {

template <class E, std::size_t N>
E enum_from(std::string_view s, const std::array<E, N>& all, std::string_view what) {
  for (E e : all) {
    if (to_string(e) == s) return e;
  }
  throw Error(ErrorCode::kMalformed, "unknown " + std::string(what) + " '" + std::string(s) + "'");
}

std::string new_session_id() {
  static std::mutex mutex;
  static std::random_device device;
  std::lock_guard lock(mutex);
  const std::uint64_t hi = device();
  const std::uint64_t lo = device();
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << ((hi << 32) ^ lo);
  return out.str();
}

void conflict_unless(std::optional<int> expected, int actual, std::string_view what) {
  if (expected && *expected != actual) {
    throw ServiceError(ErrorCode::kConflict,
                       std::string(what) + " moved on before this request was applied",
                       {{"expected", *expected}, {"actual", actual}});
  }
}

void require_mode(const Session& s, Mode m) {
  if (s.mode != m) {
    throw ServiceError(ErrorCode::kWrongMode,
                       "session is in " + std::string(to_string(s.mode)) + " mode",
                       {{"mode", to_string(s.mode)}});
  }
}

void require_not_over(const Session& s) {
  if (is_terminal(s.position)) {
    throw ServiceError(ErrorCode::kAtEnd, "the game is over", {{"ply", s.position.ply()}});
  }
}

// Plays a forced pass for every side that has nothing to place.
void auto_pass(Session& s) {
  while (!is_terminal(s.position) && !has_legal_move(s.position)) {
    s.move_log.push_back({Move::pass(), MoveSource::kAutoPass, s.position.to_move()});
    s.position = apply(s.position, Move::pass());
  }
}

void play(Session& s, Move mv, MoveSource source) {
  const Player mover = s.position.to_move();
  s.position = apply(s.position, mv);
  s.move_log.push_back({mv, source, mover});
  auto_pass(s);
}

void set_frame(Session& s, int k) {
  ReplayScript& r = *s.replay;
  r.cursor = k;
  s.position = initial_position();
  s.move_log.clear();
  for (std::size_t i = 0; i < r.frame_end[static_cast<std::size_t>(k)]; ++i) {
    const Move mv = r.moves[i];
    s.move_log.push_back(
        {mv, mv.is_pass() ? MoveSource::kAutoPass : MoveSource::kRecord, s.position.to_move()});
    s.position = apply(s.position, mv);
  }
}

ReplayScript build_script(std::string text, bool from_record, const LegalityReport& report) {
  ReplayScript r;
  r.source_text = std::move(text);
  r.from_record = from_record;
  r.report = report;
  r.moves = report.applied;
  r.frame_end.push_back(0);
  for (std::size_t i = 0; i < r.moves.size(); ++i) {
    if (r.moves[i].is_pass()) continue;
    std::size_t end = i + 1;
    while (end < r.moves.size() && r.moves[end].is_pass()) ++end;
    r.frame_end.push_back(end);
  }
  return r;
}

Failure classify(Token token, const Position& pos) {
  if (vocab::is_square(token)) {
    const Square sq = vocab::to_square(token);
    if (pos.occupied() & sq.bit()) return Failure::kOccupiedSquare;
    return flips_for(pos, sq) == 0 ? Failure::kNoFlank : Failure::kNone;
  }
  if (token == vocab::kPass) return has_legal_move(pos) ? Failure::kBadPass : Failure::kNone;
  return Failure::kBadToken;
}

Move token_move(Token token) {
  return token == vocab::kPass ? Move::pass() : Move::place(vocab::to_square(token));
}

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

void initialise_replay(Session& s, const CreateRequest& req) {
  if (req.record.has_value() == req.transcript.has_value()) {
    throw Error(ErrorCode::kInvalidConfig, "a Replay session needs exactly one of record or transcript");
  }
  if (req.record) {
    std::istringstream in(*req.record);
    ArchiveOptions opts;
    opts.strict = true;
    ArchiveContents contents = parse_archive(in, opts);
    if (contents.records.empty()) throw Error(ErrorCode::kMalformed, "record holds no game");
    s.loaded_record = std::move(contents.records.front());
    const auto report =
        validate_transcript(serialize_transcript(s.loaded_record->moves, TranscriptForm::kCompact));
    s.replay = build_script(*req.record, true, report);
  } else {
    s.replay = build_script(*req.transcript, false, validate_transcript(*req.transcript));
  }
  set_frame(s, 0);
}

}  // namespace

std::string_view to_string(Mode m) {
  return m == Mode::kHumanVsModel ? "HumanVsModel" : "Replay";
}

std::string_view to_string(MoveSource s) {
  switch (s) {
    case MoveSource::kHuman: return "Human";
    case MoveSource::kModelRaw: return "ModelRaw";
    case MoveSource::kModelFallback: return "ModelFallback";
    case MoveSource::kAutoPass: return "AutoPass";
    case MoveSource::kRecord: return "Record";
  }
  return "Unknown";
}

std::string_view to_string(Policy p) {
  switch (p) {
    case Policy::kRaw: return "Raw";
    case Policy::kResample: return "Resample";
    case Policy::kLegalMask: return "LegalMask";
  }
  return "Unknown";
}

std::string_view to_string(Direction d) {
  return d == Direction::kForward ? "forward" : "back";
}

Mode mode_from_string(std::string_view s) {
  return enum_from(s, std::array{Mode::kHumanVsModel, Mode::kReplay}, "mode");
}

MoveSource move_source_from_string(std::string_view s) {
  return enum_from(s,
                   std::array{MoveSource::kHuman, MoveSource::kModelRaw, MoveSource::kModelFallback,
                              MoveSource::kAutoPass, MoveSource::kRecord},
                   "move source");
}

Policy policy_from_string(std::string_view s) {
  return enum_from(s, std::array{Policy::kRaw, Policy::kResample, Policy::kLegalMask}, "policy");
}

Direction direction_from_string(std::string_view s) {
  return enum_from(s, std::array{Direction::kForward, Direction::kBack}, "direction");
}

Player player_from_string(std::string_view s) {
  return enum_from(s, std::array{Player::kBlack, Player::kWhite}, "colour");
}

SessionManager::SessionManager(const ModelRegistry& models, SessionOptions opts)
    : models_(models), opts_(std::move(opts)) {
  if (opts_.snapshot_dir) {
    std::filesystem::create_directories(*opts_.snapshot_dir);
    restore_snapshots();
  }
}

std::shared_ptr<SessionManager::Slot> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) {
    throw ServiceError(ErrorCode::kUnknownSession, "no session '" + id + "'", {{"id", id}});
  }
  return it->second;
}

std::string SessionManager::create(const CreateRequest& req) {
  auto slot = std::make_shared<Slot>();
  Session& s = slot->session;
  s.id = new_session_id();
  s.mode = req.mode;
  s.seed = req.seed;
  s.rng = Rng(req.seed);
  if (req.mode == Mode::kHumanVsModel) {
    if (!req.model_id) throw Error(ErrorCode::kUnknownModel, "HumanVsModel needs a model_id");
    models_.get(*req.model_id);
    s.model_id = req.model_id;
    s.human_color = req.human_color;
  } else {
    s.model_id = req.model_id;
    if (req.model_id) models_.get(*req.model_id);
    initialise_replay(s, req);
  }
  persist(s);
  std::unique_lock lock(map_mutex_);
  sessions_[s.id] = slot;
  return s.id;
}

Session SessionManager::state(const std::string& id) const {
  const auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  return slot->session;
}

Session SessionManager::human_move(const std::string& id, std::string_view move, bool takeover,
                                   std::optional<int> expected_ply) {
  const auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  Session& s = slot->session;
  require_mode(s, Mode::kHumanVsModel);
  conflict_unless(expected_ply, s.position.ply(), "the game");
  require_not_over(s);
  if (!takeover && s.human_color != s.position.to_move()) {
    throw ServiceError(ErrorCode::kNotYourTurn,
                       std::string(to_string(s.position.to_move())) + " is the model's colour",
                       {{"to_move", to_string(s.position.to_move())}});
  }
  const Move mv = move == kPassToken ? Move::pass() : Move::place(parse_square(move));
  try {
    play(s, mv, MoveSource::kHuman);
  } catch (const IllegalMoveError& e) {
    throw ServiceError(ErrorCode::kIllegalMove, e.what(),
                       {{"kind", to_string(e.kind())}, {"move", mv.text()}});
  }
  persist(s);
  return s;
}

ModelMoveOutcome SessionManager::model_move(const std::string& id, const ModelMoveRequest& req) {
  if (req.policy == Policy::kResample && req.k < 1) {
    throw Error(ErrorCode::kInvalidConfig, "Resample needs k >= 1");
  }
  const auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  Session& s = slot->session;
  require_mode(s, Mode::kHumanVsModel);
  conflict_unless(req.expected_ply, s.position.ply(), "the game");
  require_not_over(s);
  if (s.human_color == s.position.to_move()) {
    throw ServiceError(ErrorCode::kNotModelsTurn,
                       std::string(to_string(s.position.to_move())) + " is the human's colour",
                       {{"to_move", to_string(s.position.to_move())}});
  }
  const auto model = models_.get(*s.model_id);
  lm::SampleConfig sc;
  sc.temperature = req.temperature;
  sc.top_k = req.top_k;
  sc.validate(model->config().context);

  TokenSequence context{vocab::kBos};
  for (const LoggedMove& m : s.move_log) context.push_back(vocab::from_move(m.move));
  if (static_cast<int>(context.size()) >= model->config().context) {
    throw Error(ErrorCode::kContextFull, "move log exceeds the model context");
  }
  const auto logits_all = lm::forward(*model, {context});
  const auto row = logits_all.front().row(logits_all.front().rows() - 1);
  const std::span<const float> logits(row.data(), static_cast<std::size_t>(row.size()));

  ModelMoveOutcome out;
  auto propose = [&](std::span<const bool> allowed) {
    const Token t = lm::sample_from_logits(logits, sc, s.rng, allowed);
    const Failure kind = classify(t, s.position);
    if (kind == Failure::kNone) return std::optional<Token>(t);
    IllegalProposal p{s.position.ply() + 1, vocab::text(t), kind};
    s.event_log.push_back(p);
    out.events.push_back(p);
    return std::optional<Token>();
  };

  std::optional<Token> chosen;
  MoveSource source = MoveSource::kModelRaw;
  switch (req.policy) {
    case Policy::kRaw:
      chosen = propose({});
      break;
    case Policy::kResample:
      for (int attempt = 0; attempt < req.k && !chosen; ++attempt) chosen = propose({});
      break;
    case Policy::kLegalMask: {
      std::array<bool, vocab::kSize> allowed{};
      const Bitboard legal = legal_moves_mask(s.position);
      for (Square sq : squares_of(legal)) allowed[static_cast<std::size_t>(vocab::from_square(sq))] = true;
      if (legal == 0) allowed[vocab::kPass] = true;
      chosen = propose(allowed);
      source = MoveSource::kModelFallback;
      break;
    }
  }
  if (chosen) {
    out.move = token_move(*chosen);
    play(s, *out.move, source);
  } else {
    out.halted = true;
  }
  persist(s);
  out.state = s;
  return out;
}

Session SessionManager::replay_step(const std::string& id, Direction dir,
                                    std::optional<int> expected_cursor) {
  const auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  Session& s = slot->session;
  require_mode(s, Mode::kReplay);
  ReplayScript& r = *s.replay;
  conflict_unless(expected_cursor, r.cursor, "the replay cursor");
  if (dir == Direction::kBack) {
    if (r.cursor == 0) throw ServiceError(ErrorCode::kAtStart, "already at ply 0", {{"cursor", 0}});
    set_frame(s, r.cursor - 1);
  } else {
    if (r.cursor == r.placements()) {
      if (r.report.failure != Failure::kNone) {
        throw ServiceError(ErrorCode::kIllegalAhead,
                           "the next move is illegal: " + std::string(to_string(r.report.failure)),
                           {{"kind", to_string(r.report.failure)},
                            {"cursor", r.cursor},
                            {"report", othello::to_json(r.report)}});
      }
      throw ServiceError(ErrorCode::kAtEnd, "no further moves", {{"cursor", r.cursor}});
    }
    set_frame(s, r.cursor + 1);
  }
  persist(s);
  return s;
}

AuditResult SessionManager::audit(const std::string& id) const {
  const auto slot = find(id);
  std::lock_guard lock(slot->mutex);
  const Session& s = slot->session;
  AuditResult a;
  std::vector<Move> moves;
  for (const LoggedMove& m : s.move_log) {
    moves.push_back(m.move);
    if (!m.move.is_pass()) ++a.plies;
  }
  try {
    a.consistent = replay(moves) == s.position;
  } catch (const Error&) {
    a.consistent = false;
  }
  return a;
}

std::vector<std::string> SessionManager::ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

std::size_t SessionManager::size() const {
  std::shared_lock lock(map_mutex_);
  return sessions_.size();
}

void SessionManager::persist(const Session& s) const {
  if (!opts_.snapshot_dir) return;
  const auto path = *opts_.snapshot_dir / (s.id + ".json");
  const auto tmp = *opts_.snapshot_dir / (s.id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << snapshot_json(s).dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void SessionManager::restore_snapshots() {
  for (const auto& entry : std::filesystem::directory_iterator(*opts_.snapshot_dir)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      auto slot = std::make_shared<Slot>();
      Session& s = slot->session;
      s.id = j.at("id").get<std::string>();
      s.mode = mode_from_string(j.at("mode").get<std::string>());
      if (!j.at("model_id").is_null()) s.model_id = j.at("model_id").get<std::string>();
      if (!j.at("human_color").is_null()) {
        s.human_color = player_from_string(j.at("human_color").get<std::string>());
      }
      s.seed = j.at("seed").get<std::uint64_t>();
      std::istringstream rng_in(j.at("rng").get<std::string>());
      rng_in >> s.rng;
      for (const auto& e : j.at("event_log")) {
        s.event_log.push_back({e.at("ply").get<int>(), e.at("token").get<std::string>(),
                               *failure_from_string(e.at("kind").get<std::string>())});
      }
      if (s.mode == Mode::kReplay) {
        CreateRequest req;
        const auto& r = j.at("replay");
        (r.at("from_record").get<bool>() ? req.record : req.transcript) =
            r.at("source").get<std::string>();
        initialise_replay(s, req);
        const int cursor = r.at("cursor").get<int>();
        if (cursor < 0 || cursor > s.replay->placements()) {
          throw Error(ErrorCode::kMalformed, "cursor out of range");
        }
        set_frame(s, cursor);
      } else {
        for (const auto& m : j.at("move_log")) {
          const std::string text = m.at("move").get<std::string>();
          const Move mv = text == kPassToken ? Move::pass() : Move::place(parse_square(text));
          const Player mover = s.position.to_move();
          s.position = apply(s.position, mv);
          s.move_log.push_back({mv, move_source_from_string(m.at("source").get<std::string>()), mover});
        }
      }
      sessions_[s.id] = slot;
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kMalformed, "bad session snapshot " + entry.path().string() + ": " + e.what());
    }
  }
}

nlohmann::ordered_json to_json(const IllegalProposal& p) {
  return {{"ply", p.ply}, {"token", p.token}, {"kind", to_string(p.kind)}};
}

nlohmann::ordered_json to_json(const Session& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["mode"] = to_string(s.mode);
  j["model_id"] = s.model_id ? nlohmann::ordered_json(*s.model_id) : nlohmann::ordered_json();
  j["human_color"] = s.human_color ? nlohmann::ordered_json(to_string(*s.human_color))
                                   : nlohmann::ordered_json();
  j["board"] = board_json(s.position);
  j["legal"] = squares_json(legal_moves(s.position));
  const bool over = is_terminal(s.position);
  j["terminal"] = over;
  if (over) {
    const auto w = winner(score(s.position));
    j["winner"] = w ? std::string(to_string(*w)) : "Draw";
  } else {
    j["winner"] = nullptr;
  }
  std::vector<Move> moves;
  auto log = nlohmann::ordered_json::array();
  for (const LoggedMove& m : s.move_log) {
    moves.push_back(m.move);
    log.push_back({{"move", m.move.text()},
                   {"player", to_string(m.player)},
                   {"source", to_string(m.source)}});
  }
  j["timeline"] = othello::to_json(timeline(moves));
  j["move_log"] = log;
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : s.event_log) events.push_back(to_json(e));
  j["event_log"] = events;
  if (s.replay) {
    const ReplayScript& r = *s.replay;
    nlohmann::ordered_json rep;
    rep["cursor"] = r.cursor;
    rep["length"] = r.placements();
    rep["from_record"] = r.from_record;
    rep["report"] = othello::to_json(r.report);
    if (s.loaded_record) {
      auto headers = nlohmann::ordered_json::object();
      for (const auto& [k, v] : s.loaded_record->headers) headers[k] = v;
      rep["headers"] = headers;
    }
    j["replay"] = rep;
  }
  return j;
}

nlohmann::ordered_json to_json(const ModelMoveOutcome& o) {
  nlohmann::ordered_json j;
  j["move"] = o.move ? nlohmann::ordered_json(o.move->text()) : nlohmann::ordered_json();
  j["halted"] = o.halted;
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : o.events) events.push_back(to_json(e));
  j["events"] = events;
  j["state"] = to_json(o.state);
  return j;
}

nlohmann::ordered_json to_json(const AuditResult& a) {
  return {{"consistent", a.consistent}, {"plies", a.plies}};
}

nlohmann::ordered_json snapshot_json(const Session& s) {
  nlohmann::ordered_json j;
  j["id"] = s.id;
  j["mode"] = to_string(s.mode);
  j["model_id"] = s.model_id ? nlohmann::ordered_json(*s.model_id) : nlohmann::ordered_json();
  j["human_color"] = s.human_color ? nlohmann::ordered_json(to_string(*s.human_color))
                                   : nlohmann::ordered_json();
  j["seed"] = s.seed;
  j["rng"] = rng_state(s.rng);
  auto log = nlohmann::ordered_json::array();
  for (const LoggedMove& m : s.move_log) {
    log.push_back({{"move", m.move.text()}, {"source", to_string(m.source)}});
  }
  j["move_log"] = log;
  auto events = nlohmann::ordered_json::array();
  for (const auto& e : s.event_log) events.push_back(to_json(e));
  j["event_log"] = events;
  if (s.replay) {
    j["replay"] = {{"from_record", s.replay->from_record},
                   {"source", s.replay->source_text},
                   {"cursor", s.replay->cursor}};
  }
  return j;
}

}  // namespace othello::service
