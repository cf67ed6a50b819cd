#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <sstream>

#include "fixtures.hpp"
#include "othello/corpus.hpp"
#include "othello/evaluation.hpp"
#include "othello/json_io.hpp"

namespace othello {
namespace {

using testing_support::kChampionshipTranscript;

// Reference validator over the naive engine: returns (legal plies, failure).
std::pair<int, Failure> reference_validate(const std::string& compact) {
  std::istringstream in(compact);
  naive::Board b = naive::Board::initial();
  int legal = 0;
  std::string tok;
  while (in >> tok) {
    if (b.terminal()) return {legal, Failure::kOverrun};
    if (tok == "--") {
      if (!b.legal().empty()) return {legal, Failure::kBadPass};
      b = b.play(-1);
      continue;
    }
    if (tok.size() != 2 || tok[0] < 'A' || tok[0] > 'H' || tok[1] < '1' || tok[1] > '8') {
      return {legal, Failure::kBadToken};
    }
    const int index = (tok[1] - '1') * 8 + (tok[0] - 'A');
    if (b.legal().empty()) b = b.play(-1);
    if (b.cells[index / 8][index % 8] != naive::kEmpty) {
      return {legal, Failure::kOccupiedSquare};
    }
    if (b.flips(index).empty()) return {legal, Failure::kNoFlank};
    b = b.play(index);
    ++legal;
  }
  return {legal, Failure::kNone};
}

std::string first_moves(const std::vector<Move>& moves, std::size_t n) {
  return serialize_transcript({moves.begin(), moves.begin() + static_cast<long>(n)},
                              TranscriptForm::kCompact);
}

TEST(Evaluation, FailureNamesRoundTrip) {
  for (Failure f : kAllFailures) EXPECT_EQ(failure_from_string(to_string(f)), f);
  EXPECT_FALSE(failure_from_string("Bogus").has_value());
}

TEST(Evaluation, OccupiedSquareAtPlyTwo) {
  const auto r = validate_transcript("1. F5 F5");
  EXPECT_EQ(r.failure, Failure::kOccupiedSquare);
  EXPECT_EQ(r.legal_plies, 1);
  EXPECT_EQ(r.failure_ply, 2);
  EXPECT_EQ(r.failure_token, "F5");
  EXPECT_EQ(r.claimed_plies, 2);
}

TEST(Evaluation, NoFlankAtPlyTwo) {
  const auto r = validate_transcript("1. F5 A1");
  EXPECT_EQ(r.failure, Failure::kNoFlank);
  EXPECT_EQ(r.legal_plies, 1);
  EXPECT_EQ(r.failure_ply, 2);
}

TEST(Evaluation, BadToken) {
  const auto r = validate_transcript("<|startoftext|>F5 Q9 D6<|endoftext|>");
  EXPECT_EQ(r.failure, Failure::kBadToken);
  EXPECT_EQ(r.failure_ply, 2);
  EXPECT_EQ(r.failure_token, "Q9");
  EXPECT_EQ(validate_transcript("F5 BOS").failure, Failure::kBadToken);
}

TEST(Evaluation, BadPass) {
  const auto r = validate_transcript("F5 --");
  EXPECT_EQ(r.failure, Failure::kBadPass);
  EXPECT_EQ(r.failure_ply, 2);
}

TEST(Evaluation, OverrunAfterTerminal) {
  const auto r = validate_transcript(kChampionshipTranscript + " A1");
  EXPECT_EQ(r.failure, Failure::kOverrun);
  EXPECT_EQ(r.legal_plies, 60);
  EXPECT_EQ(r.failure_ply, 61);
  EXPECT_DOUBLE_EQ(r.completion_ratio, 1.0);
}

TEST(Evaluation, ChampionshipGameIsFullyLegal) {
  const auto r = validate_transcript(kChampionshipTranscript);
  EXPECT_EQ(r.failure, Failure::kNone);
  EXPECT_FALSE(r.failure_ply.has_value());
  EXPECT_EQ(r.legal_plies, 60);
  EXPECT_DOUBLE_EQ(r.completion_ratio, 1.0);
  EXPECT_DOUBLE_EQ(r.natural_ratio, 1.0);
  EXPECT_EQ(score(r.final_position), (Score{40, 24}));
  // Three forced passes are inserted automatically.
  EXPECT_EQ(r.applied.size(), 63u);
  EXPECT_EQ(replay(r.applied), r.final_position);
}

TEST(Evaluation, CompletionRatios) {
  const GameRecord game = synthesize_game(77, 0);
  std::vector<Move> placements;
  for (const Move& m : game.moves) {
    if (!m.is_pass()) placements.push_back(m);
  }
  ASSERT_GE(placements.size(), 44u);
  const std::string first = placements.front().square().name();
  const auto r43 = validate_transcript(first_moves(placements, 43) + " " + first);
  EXPECT_EQ(r43.legal_plies, 43);
  EXPECT_NEAR(r43.completion_ratio, 0.7167, 1e-4);
  const auto r27 = validate_transcript(first_moves(placements, 27) + " " + first);
  EXPECT_EQ(r27.legal_plies, 27);
  EXPECT_DOUBLE_EQ(r27.completion_ratio, 0.45);
  EXPECT_DOUBLE_EQ(r27.natural_ratio, 0.45);
  EXPECT_DOUBLE_EQ(completion_of(61), 1.0);
  EXPECT_DOUBLE_EQ(completion_of(0), 0.0);
}

TEST(Evaluation, EmptyTranscript) {
  const auto r = validate_transcript("");
  EXPECT_EQ(r.failure, Failure::kNone);
  EXPECT_EQ(r.legal_plies, 0);
  EXPECT_DOUBLE_EQ(r.natural_ratio, 0.0);
}

TEST(Evaluation, AgreesWithReferenceValidator) {
  // Random token soup, plus real games with one corrupted move.
  std::vector<std::string> transcripts = random_transcripts(300, 4);
  Rng rng(12);
  for (const GameRecord& g : synthesize_games(300, 6)) {
    auto moves = g.moves;
    const auto at = uniform_index(rng, moves.size());
    moves[at] = Move::place(Square::from_index(static_cast<int>(uniform_index(rng, 64))));
    transcripts.push_back(serialize_transcript(moves, TranscriptForm::kCompact));
    transcripts.push_back(serialize_transcript(g.moves, TranscriptForm::kCompact) + " E6");
  }
  for (const std::string& t : transcripts) {
    const auto [legal, failure] = reference_validate(t);
    const auto r = validate_transcript(t);
    ASSERT_EQ(r.legal_plies, legal) << t;
    ASSERT_EQ(r.failure, failure) << t;
    // Soundness: the applied prefix is itself a legal game.
    ASSERT_EQ(replay(r.applied), r.final_position);
    ASSERT_EQ(static_cast<int>(std::count_if(r.applied.begin(), r.applied.end(),
                                             [](const Move& m) { return !m.is_pass(); })),
              r.legal_plies);
    ASSERT_EQ(r.failure_ply.has_value(), r.failure != Failure::kNone);
    if (r.failure_ply) ASSERT_EQ(*r.failure_ply, r.legal_plies + 1);
    // The engine rejects the failing move for the same reason.
    if (r.failure == Failure::kOccupiedSquare || r.failure == Failure::kNoFlank) {
      const Move bad = Move::place(parse_square(*r.failure_token));
      try {
        apply(r.final_position, bad);
        FAIL() << "engine accepted " << *r.failure_token << " in " << t;
      } catch (const IllegalMoveError& e) {
        ASSERT_EQ(e.kind(), r.failure == Failure::kOccupiedSquare ? IllegalKind::kOccupiedSquare
                                                                   : IllegalKind::kNoFlank);
      }
    }
  }
}

TEST(Evaluation, AutoPassOnlyWhenForced) {
  for (const auto& rec : synthesize_games(200, 8)) {
    // Drop the explicit passes so the validator has to insert them.
    std::vector<Move> placements;
    for (const Move& m : rec.moves) {
      if (!m.is_pass()) placements.push_back(m);
    }
    const LegalityReport r =
        validate_transcript(serialize_transcript(placements, TranscriptForm::kCompact));
    ASSERT_EQ(r.failure, Failure::kNone);
    Position pos = initial_position();
    for (const Move& m : r.applied) {
      if (m.is_pass()) ASSERT_FALSE(has_legal_move(pos));
      pos = apply(pos, m);
    }
    EXPECT_EQ(r.applied, rec.moves);
  }
}

TEST(Evaluation, LegalPrefixesScoreTheirLength) {
  for (const GameRecord& g : synthesize_games(50, 8)) {
    const auto r = validate_transcript(serialize_transcript(g.moves, TranscriptForm::kNumbered));
    EXPECT_EQ(r.failure, Failure::kNone);
    EXPECT_EQ(r.final_position, replay(g.moves));
    EXPECT_DOUBLE_EQ(r.natural_ratio, 1.0);
  }
}

TEST(Evaluation, CompletionStats) {
  std::vector<LegalityReport> reports;
  for (const char* t : {"1. F5 F5", "1. F5 D6 2. C3 F5", "F5 Q9", "F5 D6 C3 D3"}) {
    reports.push_back(validate_transcript(t));
  }
  reports.push_back(validate_transcript(kChampionshipTranscript));
  const AggregateReport agg = completion_stats(reports);
  EXPECT_EQ(agg.n_games, 5u);
  EXPECT_DOUBLE_EQ(agg.completion_min, 1.0 / 60);
  EXPECT_DOUBLE_EQ(agg.completion_max, 1.0);
  EXPECT_DOUBLE_EQ(agg.completion_median, 3.0 / 60);
  EXPECT_NEAR(agg.completion_mean, (1 + 3 + 1 + 4 + 60) / 300.0, 1e-12);
  EXPECT_EQ(agg.histogram[0], 4u);
  EXPECT_EQ(agg.histogram[9], 1u);
  EXPECT_EQ(agg.failure_counts.at(Failure::kOccupiedSquare), 2u);
  EXPECT_EQ(agg.failure_counts.at(Failure::kBadToken), 1u);
  EXPECT_EQ(agg.failure_counts.at(Failure::kNone), 2u);
  EXPECT_EQ(agg.failure_counts.at(Failure::kOverrun), 0u);
  EXPECT_EQ(agg.full_games, 1u);

  reports.pop_back();
  EXPECT_DOUBLE_EQ(completion_stats(reports).completion_median, 2.0 / 60);
  EXPECT_THROW(completion_stats({}), Error);
}

TEST(Evaluation, CompletionStatsArePermutationInvariant) {
  std::vector<LegalityReport> reports;
  for (const auto& t : random_transcripts(40, 2)) reports.push_back(validate_transcript(t));
  const AggregateReport base = completion_stats(reports);
  Rng rng(1);
  for (int i = 0; i < 10; ++i) {
    shuffle_in_place(reports, rng);
    const AggregateReport a = completion_stats(reports);
    EXPECT_EQ(a.completion_mean, base.completion_mean);
    EXPECT_EQ(a.completion_median, base.completion_median);
    EXPECT_EQ(a.histogram, base.histogram);
    EXPECT_EQ(a.failure_counts, base.failure_counts);
  }
}

TEST(Evaluation, Timeline) {
  const Timeline t = timeline(parse_transcript("F5"));
  ASSERT_EQ(t.entries.size(), 1u);
  EXPECT_EQ(t.entries[0].ply, 1);
  EXPECT_EQ(t.entries[0].black, 4);
  EXPECT_EQ(t.entries[0].white, 1);
  EXPECT_EQ(t.entries[0].leader, Player::kBlack);

  const Timeline full = timeline(parse_transcript(kChampionshipTranscript));
  ASSERT_EQ(full.entries.size(), 60u);
  EXPECT_EQ(full.entries.back().black, 40);
  EXPECT_EQ(full.entries.back().white, 24);
  EXPECT_GE(full.trail_fraction, 0.0);
  EXPECT_LE(full.trail_fraction, 1.0);
  for (const auto& e : full.entries) EXPECT_EQ(e.black + e.white, e.ply + 4);
}

TEST(Evaluation, RandomBaseline) {
  const auto transcripts = random_transcripts(200, 9);
  ASSERT_EQ(transcripts.size(), 200u);
  for (const auto& t : transcripts) {
    const auto moves = parse_transcript(t);
    ASSERT_EQ(moves.size(), 60u);
    for (const Move& m : moves) {
      ASSERT_FALSE(m.is_pass());
      ASSERT_EQ(initial_position().occupied() & m.square().bit(), 0u);
    }
  }
  EXPECT_EQ(random_transcripts(5, 9), random_transcripts(5, 9));
  const AggregateReport agg = random_baseline(2000, 9);
  EXPECT_EQ(agg.n_games, 2000u);
  EXPECT_GT(agg.completion_mean, 0.0);
  EXPECT_LT(agg.completion_mean, 0.1);
}

TEST(Evaluation, JsonShapes) {
  const auto j = to_json(validate_transcript("1. F5 F5"));
  EXPECT_EQ(j["failure"], "OccupiedSquare");
  EXPECT_EQ(j["failure_ply"], 2);
  EXPECT_EQ(j["legal_plies"], 1);
  const auto ok = to_json(validate_transcript("F5"));
  EXPECT_TRUE(ok["failure_ply"].is_null());
  const auto b = board_json(initial_position());
  EXPECT_EQ(b["cells"][3], "...WB...");
  EXPECT_EQ(b["cells"][4], "...BW...");
  EXPECT_EQ(b["to_move"], "Black");
}

}  // namespace
}  // namespace othello
