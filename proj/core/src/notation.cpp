#include "othello/notation.hpp"

#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace othello {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

std::vector<std::string_view> split_ws(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// "12." -> 12; anything else -> nullopt.
std::optional<int> move_number(std::string_view tok) {
  if (tok.size() < 2 || tok.back() != '.') return std::nullopt;
  tok.remove_suffix(1);
  int value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) return std::nullopt;
  return value;
}

}  // namespace

std::optional<std::string> GameRecord::header(std::string_view key) const {
  for (const auto& [k, v] : headers) {
    if (k == key) return v;
  }
  return std::nullopt;
}

Square parse_square(std::string_view text) {
  if (text.size() != 2) {
    throw Error(ErrorCode::kMalformed,
                "square must be a letter and a digit: '" + std::string(text) + "'");
  }
  const char letter =
      static_cast<char>(std::toupper(static_cast<unsigned char>(text[0])));
  const char digit = text[1];
  if (letter < 'A' || letter > 'H' || digit < '1' || digit > '8') {
    throw Error(ErrorCode::kMalformed,
                "not a square name: '" + std::string(text) + "'");
  }
  return Square::at(letter - 'A' + 1, digit - '0');
}

std::string square_to_text(Square sq) { return sq.name(); }

std::vector<Move> parse_transcript(std::string_view text) {
  const std::string body = strip_delimiters(trim(text));
  std::vector<Move> moves;
  int expected_number = 1;
  for (std::string_view tok : split_ws(body)) {
    if (auto n = move_number(tok)) {
      if (*n != expected_number) {
        throw Error(ErrorCode::kMalformed,
                    "move number " + std::to_string(*n) + " where " +
                        std::to_string(expected_number) + " was expected");
      }
      ++expected_number;
      continue;
    }
    if (tok == kPassToken) {
      moves.push_back(Move::pass());
    } else {
      moves.push_back(Move::place(parse_square(tok)));
    }
  }
  return moves;
}

std::string serialize_transcript(const std::vector<Move>& moves,
                                 TranscriptForm form) {
  std::string out;
  out.reserve(moves.size() * 4);
  for (std::size_t i = 0; i < moves.size(); ++i) {
    if (i > 0) out += ' ';
    if (form == TranscriptForm::kNumbered && i % 2 == 0) {
      out += std::to_string(i / 2 + 1);
      out += ". ";
    }
    out += moves[i].text();
  }
  return out;
}

std::string wrap_delimiters(std::string_view text) {
  std::string out;
  out.reserve(kStartDelimiter.size() + text.size() + kEndDelimiter.size());
  out += kStartDelimiter;
  out += text;
  out += kEndDelimiter;
  return out;
}

std::string strip_delimiters(std::string_view text) {
  if (text.starts_with(kStartDelimiter)) text.remove_prefix(kStartDelimiter.size());
  if (text.ends_with(kEndDelimiter)) text.remove_suffix(kEndDelimiter.size());
  return std::string(text);
}

std::optional<Score> parse_result(std::string_view text) {
  text = trim(text);
  const auto dash = text.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  Score s;
  const auto lhs = text.substr(0, dash);
  const auto rhs = text.substr(dash + 1);
  auto [p1, e1] = std::from_chars(lhs.data(), lhs.data() + lhs.size(), s.black);
  auto [p2, e2] = std::from_chars(rhs.data(), rhs.data() + rhs.size(), s.white);
  if (e1 != std::errc() || e2 != std::errc() || p1 != lhs.data() + lhs.size() ||
      p2 != rhs.data() + rhs.size() || lhs.empty() || rhs.empty()) {
    return std::nullopt;
  }
  if (s.black < 0 || s.white < 0 || s.black + s.white > kNumSquares) {
    return std::nullopt;
  }
  return s;
}

std::string format_result(const Score& s) {
  return std::to_string(s.black) + "-" + std::to_string(s.white);
}

Position replay(const std::vector<Move>& moves, bool auto_pass) {
  Position pos = initial_position();
  for (const Move& mv : moves) {
    if (auto_pass && !mv.is_pass() && !has_legal_move(pos) && !is_terminal(pos)) {
      pos = apply(pos, Move::pass());
    }
    pos = apply(pos, mv);
  }
  return pos;
}

namespace {

// `[Key "Value"]` -> (Key, Value).
std::optional<std::pair<std::string, std::string>> parse_header(
    std::string_view line) {
  line = trim(line);
  if (line.size() < 2 || line.front() != '[' || line.back() != ']') {
    return std::nullopt;
  }
  line = trim(line.substr(1, line.size() - 2));
  const auto space = line.find_first_of(" \t");
  if (space == std::string_view::npos || space == 0) return std::nullopt;
  std::string key(line.substr(0, space));
  std::string_view rest = trim(line.substr(space));
  if (rest.size() < 2 || rest.front() != '"' || rest.back() != '"') {
    return std::nullopt;
  }
  return std::make_pair(std::move(key),
                        std::string(rest.substr(1, rest.size() - 2)));
}

struct PendingGame {
  int start_line = 0;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string move_text;
  std::optional<std::string> error;
  bool empty() const { return headers.empty() && move_text.empty() && !error; }
};

GameRecord finish_game(PendingGame& g, const ArchiveOptions& opts) {
  if (g.error) throw Error(ErrorCode::kMalformed, *g.error);
  GameRecord rec;
  rec.headers = std::move(g.headers);
  rec.moves = parse_transcript(g.move_text);
  if (auto r = rec.header("Result")) {
    rec.result = parse_result(*r);
    if (!rec.result) {
      throw Error(ErrorCode::kMalformed, "unreadable Result header '" + *r + "'");
    }
  }
  if (opts.validate) {
    Position final_pos = initial_position();
    try {
      final_pos = replay(rec.moves, /*auto_pass=*/true);
    } catch (const IllegalMoveError& e) {
      throw Error(ErrorCode::kMalformed, std::string("illegal move: ") + e.what());
    }
    if (rec.result && *rec.result != score(final_pos)) {
      throw Error(ErrorCode::kMalformed,
                  "Result " + format_result(*rec.result) +
                      " disagrees with replayed score " +
                      format_result(score(final_pos)));
    }
  }
  return rec;
}

}  // namespace

ArchiveContents parse_archive(std::istream& in, const ArchiveOptions& opts) {
  ArchiveContents out;
  PendingGame game;
  int line_no = 0;

  auto flush = [&] {
    if (game.empty()) return;
    try {
      out.records.push_back(finish_game(game, opts));
    } catch (const Error& e) {
      const std::string msg =
          "game at line " + std::to_string(game.start_line) + ": " + e.what();
      if (opts.strict) throw Error(ErrorCode::kMalformed, msg);
      out.issues.push_back({game.start_line, e.what()});
    }
    game = PendingGame{};
  };

  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (view.empty()) {
      flush();
      continue;
    }
    if (game.empty()) game.start_line = line_no;
    if (view.front() == '[') {
      if (!game.move_text.empty()) {
        // A header after move text starts a new game without a blank line.
        flush();
        game.start_line = line_no;
      }
      if (auto h = parse_header(view)) {
        game.headers.push_back(std::move(*h));
      } else if (!game.error) {
        game.error = "line " + std::to_string(line_no) + ": bad header";
      }
      continue;
    }
    if (!game.move_text.empty()) game.move_text += ' ';
    game.move_text += view;
  }
  if (in.bad()) throw Error(ErrorCode::kIo, "archive stream read failed");
  flush();
  return out;
}

std::string serialize_record(const GameRecord& rec) {
  std::ostringstream out;
  bool has_result = false;
  for (const auto& [k, v] : rec.headers) {
    out << '[' << k << " \"" << v << "\"]\n";
    has_result = has_result || k == "Result";
  }
  if (rec.result && !has_result) {
    out << "[Result \"" << format_result(*rec.result) << "\"]\n";
  }
  out << serialize_transcript(rec.moves, TranscriptForm::kNumbered) << '\n';
  return out.str();
}

void write_archive(std::ostream& out, const std::vector<GameRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (i > 0) out << '\n';
    out << serialize_record(records[i]);
  }
}

std::string corpus_line(const std::vector<Move>& moves) {
  return wrap_delimiters(serialize_transcript(moves, TranscriptForm::kCompact));
}

}  // namespace othello
