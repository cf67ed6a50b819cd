#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "naive_engine.hpp"
#include "othello/board.hpp"
#include "othello/rng.hpp"

namespace testing_support {

// The 1977 championship transcript as printed, line breaks included.
inline const std::string kChampionshipTranscript =
    "1. F5 D6 2. C3 D3 3. C4 F4 4. F6 G5 5. E6 F7\n"
    "6. C7 C5 7. G3 B5 8. E3 G4 9. B3 C6 10. D7\n"
    "E7 11. B6 B4 12. F3 D8 13. A6 E2 14. F1 C8\n"
    "15. A5 H3 16. F2 D2 17. C2 B2 18. G6 H5\n"
    "19. A1 D1 20. E1 G1 21. H7 A3 22. A2 A4\n"
    "23. B1 H6 24. G7 H8 25. E8 F8 26. H4 B7\n"
    "27. B8 C1 28. H1 A8 29. A7 G8 30. H2 G2";

// Perft from the initial position, depths 1..6, computed with an
// independent array-scan engine written before the bitboard engine.
inline constexpr std::uint64_t kPerft[] = {4, 12, 56, 244, 1396, 8200};

inline othello::Position to_position(const naive::Board& b) {
  return othello::Position::from_masks(
      b.mask(naive::kBlack), b.mask(naive::kWhite),
      b.to_move == naive::kBlack ? othello::Player::kBlack : othello::Player::kWhite,
      b.ply);
}

// Random reachable positions: a uniform-random playout from the start,
// stopped after a random number of turns. Passes are played when forced.
inline std::vector<naive::Board> random_positions(int count, std::uint64_t seed) {
  othello::Rng rng(seed);
  std::vector<naive::Board> out;
  out.reserve(static_cast<std::size_t>(count));
  while (static_cast<int>(out.size()) < count) {
    naive::Board b = naive::Board::initial();
    const auto stop = static_cast<int>(othello::uniform_index(rng, 64));
    for (int turn = 0; turn < stop && !b.terminal(); ++turn) {
      const auto legal = b.legal();
      if (legal.empty()) {
        b = b.play(-1);
        continue;
      }
      auto it = legal.begin();
      std::advance(it, static_cast<long>(othello::uniform_index(rng, legal.size())));
      b = b.play(*it);
    }
    out.push_back(b);
  }
  return out;
}

}  // namespace testing_support
