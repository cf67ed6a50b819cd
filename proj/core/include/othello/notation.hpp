#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "othello/board.hpp"

namespace othello {

inline constexpr std::string_view kStartDelimiter = "<|startoftext|>";
inline constexpr std::string_view kEndDelimiter = "<|endoftext|>";
inline constexpr std::string_view kPassToken = "--";

struct GameRecord {
  std::vector<std::pair<std::string, std::string>> headers;
  std::vector<Move> moves;
  std::optional<Score> result;

  // Value of the first header with this key, if any.
  std::optional<std::string> header(std::string_view key) const;

  friend bool operator==(const GameRecord&, const GameRecord&) = default;
};

enum class TranscriptForm { kNumbered, kCompact };

// Case-insensitive "F5" / "f5". Throws Malformed.
Square parse_square(std::string_view text);
std::string square_to_text(Square sq);

// Accepts "1. F5 D6 2. C3 D3" and "F5 D6 C3 D3", with or without the
// start/end delimiters. "--" parses to a pass.
std::vector<Move> parse_transcript(std::string_view text);

// Numbered form pairs moves as "N. <black> <white>" by slot, so a pass
// occupies its slot as "--".
std::string serialize_transcript(const std::vector<Move>& moves,
                                 TranscriptForm form);

std::string wrap_delimiters(std::string_view text);
// Removes a leading start delimiter and a trailing end delimiter when
// present; otherwise the text is returned unchanged.
std::string strip_delimiters(std::string_view text);

// "52-12" <-> Score.
std::optional<Score> parse_result(std::string_view text);
std::string format_result(const Score& s);

// Replays moves from the initial position. Passes must be explicit unless
// auto_pass is set, in which case a pass is inserted whenever the mover has
// no placement. Throws IllegalMoveError.
Position replay(const std::vector<Move>& moves, bool auto_pass = false);

struct ArchiveOptions {
  // Abort on the first malformed game instead of skipping it.
  bool strict = false;
  // Reject games whose moves do not replay (with auto-pass) or whose Result
  // header disagrees with the replayed score.
  bool validate = true;
};

struct ArchiveIssue {
  int line = 0;  // 1-based line where the offending game starts
  std::string message;
};

struct ArchiveContents {
  std::vector<GameRecord> records;
  std::vector<ArchiveIssue> issues;
};

// Games are separated by blank lines; `[Key "Value"]` lines are headers and
// every other line is move text. Throws Malformed in strict mode and Io when
// the stream fails.
ArchiveContents parse_archive(std::istream& in, const ArchiveOptions& opts = {});

// Headers, then the Numbered transcript on one line, then a blank line.
std::string serialize_record(const GameRecord& rec);
void write_archive(std::ostream& out, const std::vector<GameRecord>& records);

// One delimiter-wrapped Compact transcript per line.
std::string corpus_line(const std::vector<Move>& moves);

}  // namespace othello
