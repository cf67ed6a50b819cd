#include "othello/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "othello/rng.hpp"

namespace othello {

std::string_view to_string(Failure f) {
  switch (f) {
    case Failure::kNone: return "None";
    case Failure::kOccupiedSquare: return "OccupiedSquare";
    case Failure::kNoFlank: return "NoFlank";
    case Failure::kBadToken: return "BadToken";
    case Failure::kOverrun: return "Overrun";
    case Failure::kBadPass: return "BadPass";
  }
  return "Unknown";
}

std::optional<Failure> failure_from_string(std::string_view s) {
  for (Failure f : kAllFailures) {
    if (to_string(f) == s) return f;
  }
  return std::nullopt;
}

namespace {

bool is_move_number(std::string_view tok) {
  if (tok.size() < 2 || tok.back() != '.') return false;
  return std::all_of(tok.begin(), tok.end() - 1,
                     [](char c) { return c >= '0' && c <= '9'; });
}

std::vector<std::string_view> move_tokens(std::string_view body) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  auto space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  };
  while (i < body.size()) {
    while (i < body.size() && space(body[i])) ++i;
    std::size_t j = i;
    while (j < body.size() && !space(body[j])) ++j;
    if (j > i) {
      auto tok = body.substr(i, j - i);
      if (!is_move_number(tok)) out.push_back(tok);
    }
    i = j;
  }
  return out;
}

}  // namespace

LegalityReport validate_transcript(std::string_view text) {
  const std::string body = strip_delimiters(text);
  const auto tokens = move_tokens(body);

  LegalityReport rep;
  rep.claimed_plies = static_cast<int>(std::count_if(
      tokens.begin(), tokens.end(), [](std::string_view t) { return t != kPassToken; }));

  Position pos = initial_position();
  auto fail = [&](Failure f, std::string_view tok) {
    rep.failure = f;
    rep.failure_ply = rep.legal_plies + 1;
    rep.failure_token = std::string(tok);
  };

  for (std::string_view tok : tokens) {
    if (is_terminal(pos)) {
      fail(Failure::kOverrun, tok);
      break;
    }
    if (tok == kPassToken) {
      if (has_legal_move(pos)) {
        fail(Failure::kBadPass, tok);
        break;
      }
      pos = apply(pos, Move::pass());
      rep.applied.push_back(Move::pass());
      continue;
    }
    Square sq;
    try {
      sq = parse_square(tok);
    } catch (const Error&) {
      fail(Failure::kBadToken, tok);
      break;
    }
    if (!has_legal_move(pos)) {
      pos = apply(pos, Move::pass());
      rep.applied.push_back(Move::pass());
    }
    if (pos.occupied() & sq.bit()) {
      fail(Failure::kOccupiedSquare, tok);
      break;
    }
    if (flips_for(pos, sq) == 0) {
      fail(Failure::kNoFlank, tok);
      break;
    }
    pos = apply(pos, Move::place(sq));
    rep.applied.push_back(Move::place(sq));
    ++rep.legal_plies;
  }

  rep.final_position = pos;
  rep.completion_ratio = completion_of(rep.legal_plies);
  rep.natural_ratio = is_terminal(pos) ? 1.0 : rep.completion_ratio;
  return rep;
}

AggregateReport completion_stats(const std::vector<LegalityReport>& reports) {
  if (reports.empty()) {
    throw Error(ErrorCode::kEmptyInput, "completion_stats needs at least one report");
  }
  AggregateReport agg;
  agg.n_games = reports.size();
  for (Failure f : kAllFailures) agg.failure_counts[f] = 0;

  std::vector<double> ratios;
  ratios.reserve(reports.size());
  for (const auto& r : reports) {
    ratios.push_back(r.completion_ratio);
    ++agg.failure_counts[r.failure];
    if (r.failure == Failure::kNone && is_terminal(r.final_position)) ++agg.full_games;
    const auto bin = std::min<std::size_t>(
        static_cast<std::size_t>(std::floor(r.completion_ratio * 10.0)), 9);
    ++agg.histogram[bin];
  }
  // Sorting first makes the mean independent of input order.
  std::sort(ratios.begin(), ratios.end());
  double sum = 0.0;
  for (double r : ratios) sum += r;
  const auto n = ratios.size();
  agg.completion_min = ratios.front();
  agg.completion_max = ratios.back();
  agg.completion_mean = sum / static_cast<double>(n);
  agg.completion_median =
      n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);

  std::vector<double> naturals;
  naturals.reserve(n);
  for (const auto& r : reports) naturals.push_back(r.natural_ratio);
  std::sort(naturals.begin(), naturals.end());
  double natural_sum = 0.0;
  for (double r : naturals) natural_sum += r;
  agg.natural_mean = natural_sum / static_cast<double>(n);
  return agg;
}

Timeline timeline(const std::vector<Move>& moves) {
  Timeline tl;
  Position pos = initial_position();
  for (const Move& mv : moves) {
    if (!mv.is_pass() && !has_legal_move(pos) && !is_terminal(pos)) {
      pos = apply(pos, Move::pass());
    }
    pos = apply(pos, mv);
    if (mv.is_pass()) continue;
    const Score s = score(pos);
    tl.entries.push_back({pos.ply(), s.black, s.white, winner(s)});
  }
  const auto final_winner = winner(score(pos));
  if (final_winner && !tl.entries.empty()) {
    std::size_t trailing = 0;
    for (const auto& e : tl.entries) {
      const int mine = *final_winner == Player::kBlack ? e.black : e.white;
      const int theirs = *final_winner == Player::kBlack ? e.white : e.black;
      if (mine < theirs) ++trailing;
    }
    tl.trail_fraction =
        static_cast<double>(trailing) / static_cast<double>(tl.entries.size());
  }
  return tl;
}

Timeline timeline(const GameRecord& record) { return timeline(record.moves); }

std::vector<std::string> random_transcripts(int n, std::uint64_t seed) {
  std::vector<Square> playable;
  const Bitboard start = initial_position().occupied();
  for (int i = 0; i < kNumSquares; ++i) {
    const Square sq = Square::from_index(i);
    if (!(start & sq.bit())) playable.push_back(sq);
  }
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int g = 0; g < n; ++g) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(g)));
    std::string text;
    for (int i = 0; i < kMaxPlies; ++i) {
      if (i > 0) text += ' ';
      text += playable[uniform_index(rng, playable.size())].name();
    }
    out.push_back(std::move(text));
  }
  return out;
}

AggregateReport random_baseline(int n, std::uint64_t seed) {
  std::vector<LegalityReport> reports;
  for (const auto& t : random_transcripts(n, seed)) {
    reports.push_back(validate_transcript(t));
  }
  return completion_stats(reports);
}

}  // namespace othello
