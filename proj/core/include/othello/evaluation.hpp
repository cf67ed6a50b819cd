#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "othello/board.hpp"
#include "othello/notation.hpp"

namespace othello {

enum class Failure {
  kNone,
  kOccupiedSquare,
  kNoFlank,
  kBadToken,
  kOverrun,
  // An explicit "--" while the mover still had a placement.
  kBadPass,
};

inline constexpr std::array<Failure, 6> kAllFailures = {
    Failure::kNone,     Failure::kOccupiedSquare, Failure::kNoFlank,
    Failure::kBadToken, Failure::kOverrun,        Failure::kBadPass};

std::string_view to_string(Failure f);
std::optional<Failure> failure_from_string(std::string_view s);

struct LegalityReport {
  int legal_plies = 0;
  int claimed_plies = 0;
  Failure failure = Failure::kNone;
  // 1-based ply of the rejected placement; set iff failure != kNone.
  std::optional<int> failure_ply;
  // The offending token text, when there is one.
  std::optional<std::string> failure_token;
  Position final_position = initial_position();
  // Placements actually applied, auto-passes included, in order.
  std::vector<Move> applied;
  double completion_ratio = 0.0;
  // 1.0 when the replay reached a terminal position, else completion_ratio.
  double natural_ratio = 0.0;
};

// Replays a transcript (Numbered or Compact, with or without delimiters)
// from the initial position and stops at the first violation. When the side
// to move has no placement a pass is inserted before the next token is read,
// unless that token is itself "--". Failures are reported, never thrown.
LegalityReport validate_transcript(std::string_view text);

inline double completion_of(int legal_plies) {
  const double r = static_cast<double>(legal_plies) / kMaxPlies;
  return r > 1.0 ? 1.0 : r;
}

struct AggregateReport {
  std::size_t n_games = 0;
  double completion_min = 0.0;
  double completion_max = 0.0;
  double completion_mean = 0.0;
  double completion_median = 0.0;
  double natural_mean = 0.0;
  // Ten equal bins over [0, 1]; 1.0 falls in the last bin.
  std::array<std::size_t, 10> histogram{};
  std::map<Failure, std::size_t> failure_counts;
  // Games that replayed without failure and ended in a terminal position.
  std::size_t full_games = 0;
};

// Throws EmptyInput for an empty report list.
AggregateReport completion_stats(const std::vector<LegalityReport>& reports);

struct TimelineEntry {
  int ply = 0;
  int black = 0;
  int white = 0;
  std::optional<Player> leader;  // nullopt for a tie
};

struct Timeline {
  std::vector<TimelineEntry> entries;
  // Fraction of plies at which the eventual winner holds strictly fewer
  // discs; 0 for a drawn game.
  double trail_fraction = 0.0;
};

// One entry per placement, passes replayed automatically. Throws
// IllegalMoveError if the record does not replay.
Timeline timeline(const GameRecord& record);
Timeline timeline(const std::vector<Move>& moves);

// n transcripts of 60 tokens each drawn uniformly from the 60 squares that
// are empty at the start, evaluated like model output.
std::vector<std::string> random_transcripts(int n, std::uint64_t seed);
AggregateReport random_baseline(int n, std::uint64_t seed);

}  // namespace othello
