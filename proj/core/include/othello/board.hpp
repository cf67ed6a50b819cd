#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "othello/error.hpp"

namespace othello {

using Bitboard = std::uint64_t;

inline constexpr int kBoardSize = 8;
inline constexpr int kNumSquares = 64;
// Four discs start on the board, so a game holds at most 60 placements.
inline constexpr int kMaxPlies = 60;

enum class Player : std::uint8_t { kBlack, kWhite };

constexpr Player opponent(Player p) noexcept {
  return p == Player::kBlack ? Player::kWhite : Player::kBlack;
}

std::string_view to_string(Player p);

// Canonical index is (row - 1) * 8 + (column - 1). Row 1 is the top rank,
// column 1 is file A.
class Square {
 public:
  constexpr Square() = default;
  static constexpr Square from_index(int index) {
    if (index < 0 || index >= kNumSquares) {
      throw Error(ErrorCode::kMalformed, "square index out of range");
    }
    return Square(static_cast<std::uint8_t>(index));
  }
  // column and row are 1-based.
  static constexpr Square at(int column, int row) {
    if (column < 1 || column > kBoardSize || row < 1 || row > kBoardSize) {
      throw Error(ErrorCode::kMalformed, "square coordinates out of range");
    }
    return Square(static_cast<std::uint8_t>((row - 1) * 8 + (column - 1)));
  }

  constexpr int index() const noexcept { return index_; }
  constexpr int column() const noexcept { return index_ % 8 + 1; }
  constexpr int row() const noexcept { return index_ / 8 + 1; }
  constexpr Bitboard bit() const noexcept { return Bitboard{1} << index_; }

  // Uppercase canonical name, e.g. "F5".
  std::string name() const;

  friend constexpr bool operator==(Square, Square) = default;
  friend constexpr auto operator<=>(Square, Square) = default;

 private:
  explicit constexpr Square(std::uint8_t index) : index_(index) {}
  std::uint8_t index_ = 0;
};

class Move {
 public:
  static constexpr Move place(Square sq) noexcept { return Move(sq.index()); }
  static constexpr Move pass() noexcept { return Move(kPassCode); }

  constexpr bool is_pass() const noexcept { return code_ == kPassCode; }
  // Precondition: !is_pass().
  constexpr Square square() const { return Square::from_index(code_); }

  // "F5" or "--".
  std::string text() const;

  friend constexpr bool operator==(Move, Move) = default;

 private:
  static constexpr std::uint8_t kPassCode = 64;
  explicit constexpr Move(std::uint8_t code) : code_(code) {}
  std::uint8_t code_;
};

enum class IllegalKind { kOccupiedSquare, kNoFlank, kBadPass };

std::string_view to_string(IllegalKind kind);

class IllegalMoveError : public Error {
 public:
  IllegalMoveError(IllegalKind kind, const std::string& message)
      : Error(ErrorCode::kIllegalMove, message), kind_(kind) {}
  IllegalKind kind() const noexcept { return kind_; }

 private:
  IllegalKind kind_;
};

struct Score {
  int black = 0;
  int white = 0;

  int empties() const noexcept { return kNumSquares - black - white; }
  friend bool operator==(const Score&, const Score&) = default;
};

// Immutable game state. Every operation below is a pure function.
class Position {
 public:
  // Throws Malformed when the masks overlap, the ply does not match the
  // disc count or the ply exceeds the 60-placement cap.
  static Position from_masks(Bitboard black, Bitboard white, Player to_move,
                             int ply);

  Bitboard black() const noexcept { return black_; }
  Bitboard white() const noexcept { return white_; }
  Bitboard occupied() const noexcept { return black_ | white_; }
  Bitboard empty() const noexcept { return ~occupied(); }
  Bitboard mover() const noexcept {
    return to_move_ == Player::kBlack ? black_ : white_;
  }
  Bitboard waiting() const noexcept {
    return to_move_ == Player::kBlack ? white_ : black_;
  }
  Player to_move() const noexcept { return to_move_; }
  int ply() const noexcept { return ply_; }

  // Disc at sq, or nullopt when empty.
  std::optional<Player> at(Square sq) const noexcept;

  friend bool operator==(const Position&, const Position&) = default;

 private:
  friend Position initial_position();
  friend Position apply(const Position&, Move);
  Position(Bitboard black, Bitboard white, Player to_move, int ply)
      : black_(black), white_(white), to_move_(to_move), ply_(ply) {}

  Bitboard black_ = 0;
  Bitboard white_ = 0;
  Player to_move_ = Player::kBlack;
  int ply_ = 0;
};

Position initial_position();

// Bitmask of squares where the side to move may place a disc.
Bitboard legal_moves_mask(const Position& pos) noexcept;
std::vector<Square> legal_moves(const Position& pos);
bool has_legal_move(const Position& pos) noexcept;

// Discs flipped by placing on sq. Throws Error(kOccupiedSquare) if sq is
// not empty. An empty result means the placement is illegal.
Bitboard flips_for(const Position& pos, Square sq);

Position apply(const Position& pos, Move mv);

bool is_terminal(const Position& pos) noexcept;

Score score(const Position& pos) noexcept;

// Winner by disc count, nullopt for a draw.
std::optional<Player> winner(const Score& s) noexcept;

// Counts placement sequences of the given length. Forced passes are taken
// transparently and do not consume depth.
std::uint64_t perft(const Position& pos, int depth);

std::vector<Square> squares_of(Bitboard mask);

// The eight symmetries of the square board.
enum class Symmetry : std::uint8_t {
  kIdentity,
  kRotate90,
  kRotate180,
  kRotate270,
  kFlipHorizontal,
  kFlipVertical,
  kFlipDiagonal,
  kFlipAntiDiagonal,
};

inline constexpr std::array<Symmetry, 8> kAllSymmetries = {
    Symmetry::kIdentity,       Symmetry::kRotate90,
    Symmetry::kRotate180,      Symmetry::kRotate270,
    Symmetry::kFlipHorizontal, Symmetry::kFlipVertical,
    Symmetry::kFlipDiagonal,   Symmetry::kFlipAntiDiagonal,
};

Square transform(Square sq, Symmetry s);
Bitboard transform(Bitboard b, Symmetry s);
Position transform(const Position& pos, Symmetry s);
Move transform(Move mv, Symmetry s);

// Multi-line ASCII diagram with file letters and rank numbers.
std::string render(const Position& pos);

}  // namespace othello
