#include "othello/board.hpp"

#include <bit>
#include <sstream>

namespace othello {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kOccupiedSquare: return "OccupiedSquare";
    case ErrorCode::kIllegalMove: return "IllegalMove";
    case ErrorCode::kMalformed: return "Malformed";
    case ErrorCode::kInsufficientRecords: return "InsufficientRecords";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kSequenceTooLong: return "SequenceTooLong";
    case ErrorCode::kBadToken: return "BadToken";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFinite: return "NonFinite";
    case ErrorCode::kContextFull: return "ContextFull";
    case ErrorCode::kCorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kUnknownModel: return "UnknownModel";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownJob: return "UnknownJob";
    case ErrorCode::kNotYourTurn: return "NotYourTurn";
    case ErrorCode::kNotModelsTurn: return "NotModelsTurn";
    case ErrorCode::kWrongMode: return "WrongMode";
    case ErrorCode::kAtStart: return "AtStart";
    case ErrorCode::kAtEnd: return "AtEnd";
    case ErrorCode::kIllegalAhead: return "IllegalAhead";
    case ErrorCode::kConflict: return "Conflict";
  }
  return "Unknown";
}

std::string_view to_string(Player p) {
  return p == Player::kBlack ? "Black" : "White";
}

std::string_view to_string(IllegalKind kind) {
  switch (kind) {
    case IllegalKind::kOccupiedSquare: return "OccupiedSquare";
    case IllegalKind::kNoFlank: return "NoFlank";
    case IllegalKind::kBadPass: return "BadPass";
  }
  return "Unknown";
}

std::string Square::name() const {
  return {static_cast<char>('A' + column() - 1),
          static_cast<char>('0' + row())};
}

std::string Move::text() const { return is_pass() ? "--" : square().name(); }

namespace {

constexpr Bitboard kNotFileA = 0xfefefefefefefefeULL;
constexpr Bitboard kNotFileH = 0x7f7f7f7f7f7f7f7fULL;

// Shift every disc one step in direction `Dir`. Index grows eastwards
// (column + 1) and southwards (row + 1).
enum Dir { kE, kW, kS, kN, kSE, kSW, kNE, kNW };
inline constexpr std::array<Dir, 8> kDirs = {kE, kW, kS, kN, kSE, kSW, kNE, kNW};

constexpr Bitboard shift(Bitboard b, Dir d) noexcept {
  switch (d) {
    case kE: return (b << 1) & kNotFileA;
    case kW: return (b >> 1) & kNotFileH;
    case kS: return b << 8;
    case kN: return b >> 8;
    case kSE: return (b << 9) & kNotFileA;
    case kSW: return (b << 7) & kNotFileH;
    case kNE: return (b >> 7) & kNotFileA;
    case kNW: return (b >> 9) & kNotFileH;
  }
  return 0;
}

Bitboard moves_for(Bitboard own, Bitboard opp) noexcept {
  const Bitboard empty = ~(own | opp);
  Bitboard moves = 0;
  for (Dir d : kDirs) {
    Bitboard run = shift(own, d) & opp;
    for (int i = 0; i < 5; ++i) run |= shift(run, d) & opp;
    moves |= shift(run, d) & empty;
  }
  return moves;
}

Bitboard flips_unchecked(Bitboard own, Bitboard opp, Bitboard placed) noexcept {
  Bitboard flips = 0;
  for (Dir d : kDirs) {
    Bitboard run = 0;
    Bitboard x = shift(placed, d);
    while (x & opp) {
      run |= x;
      x = shift(x, d);
    }
    if (x & own) flips |= run;
  }
  return flips;
}

}  // namespace

Position Position::from_masks(Bitboard black, Bitboard white, Player to_move,
                              int ply) {
  if (black & white) {
    throw Error(ErrorCode::kMalformed, "black and white masks overlap");
  }
  if (ply < 0 || ply > kMaxPlies) {
    throw Error(ErrorCode::kMalformed, "ply outside 0..60");
  }
  if (std::popcount(black) + std::popcount(white) != 4 + ply) {
    throw Error(ErrorCode::kMalformed, "disc count does not equal 4 + ply");
  }
  return Position(black, white, to_move, ply);
}

std::optional<Player> Position::at(Square sq) const noexcept {
  if (black_ & sq.bit()) return Player::kBlack;
  if (white_ & sq.bit()) return Player::kWhite;
  return std::nullopt;
}

Position initial_position() {
  const Bitboard black = Square::at(4, 5).bit() | Square::at(5, 4).bit();
  const Bitboard white = Square::at(4, 4).bit() | Square::at(5, 5).bit();
  return Position(black, white, Player::kBlack, 0);
}

Bitboard legal_moves_mask(const Position& pos) noexcept {
  return moves_for(pos.mover(), pos.waiting());
}

std::vector<Square> legal_moves(const Position& pos) {
  return squares_of(legal_moves_mask(pos));
}

bool has_legal_move(const Position& pos) noexcept {
  return legal_moves_mask(pos) != 0;
}

Bitboard flips_for(const Position& pos, Square sq) {
  if (pos.occupied() & sq.bit()) {
    throw Error(ErrorCode::kOccupiedSquare, sq.name() + " is occupied");
  }
  return flips_unchecked(pos.mover(), pos.waiting(), sq.bit());
}

Position apply(const Position& pos, Move mv) {
  if (mv.is_pass()) {
    if (has_legal_move(pos)) {
      throw IllegalMoveError(IllegalKind::kBadPass,
                             "pass while a placement is available");
    }
    return Position(pos.black_, pos.white_, opponent(pos.to_move_), pos.ply_);
  }
  const Square sq = mv.square();
  if (pos.occupied() & sq.bit()) {
    throw IllegalMoveError(IllegalKind::kOccupiedSquare,
                           sq.name() + " is occupied");
  }
  const Bitboard flips = flips_unchecked(pos.mover(), pos.waiting(), sq.bit());
  if (flips == 0) {
    throw IllegalMoveError(IllegalKind::kNoFlank,
                           sq.name() + " outflanks nothing");
  }
  Bitboard own = pos.mover() | flips | sq.bit();
  Bitboard opp = pos.waiting() & ~flips;
  if (pos.to_move_ == Player::kBlack) {
    return Position(own, opp, Player::kWhite, pos.ply_ + 1);
  }
  return Position(opp, own, Player::kBlack, pos.ply_ + 1);
}

bool is_terminal(const Position& pos) noexcept {
  return moves_for(pos.black(), pos.white()) == 0 &&
         moves_for(pos.white(), pos.black()) == 0;
}

Score score(const Position& pos) noexcept {
  return {std::popcount(pos.black()), std::popcount(pos.white())};
}

std::optional<Player> winner(const Score& s) noexcept {
  if (s.black > s.white) return Player::kBlack;
  if (s.white > s.black) return Player::kWhite;
  return std::nullopt;
}

std::uint64_t perft(const Position& pos, int depth) {
  if (depth <= 0) return 1;
  Bitboard moves = legal_moves_mask(pos);
  if (moves == 0) {
    if (is_terminal(pos)) return 0;
    return perft(apply(pos, Move::pass()), depth);
  }
  if (depth == 1) return static_cast<std::uint64_t>(std::popcount(moves));
  std::uint64_t total = 0;
  while (moves) {
    const int idx = std::countr_zero(moves);
    moves &= moves - 1;
    total += perft(apply(pos, Move::place(Square::from_index(idx))), depth - 1);
  }
  return total;
}

std::vector<Square> squares_of(Bitboard mask) {
  std::vector<Square> out;
  out.reserve(static_cast<std::size_t>(std::popcount(mask)));
  while (mask) {
    out.push_back(Square::from_index(std::countr_zero(mask)));
    mask &= mask - 1;
  }
  return out;
}

Square transform(Square sq, Symmetry s) {
  const int r = sq.row() - 1;
  const int c = sq.column() - 1;
  int nr = r;
  int nc = c;
  switch (s) {
    case Symmetry::kIdentity: break;
    case Symmetry::kRotate90: nr = c; nc = 7 - r; break;
    case Symmetry::kRotate180: nr = 7 - r; nc = 7 - c; break;
    case Symmetry::kRotate270: nr = 7 - c; nc = r; break;
    case Symmetry::kFlipHorizontal: nc = 7 - c; break;
    case Symmetry::kFlipVertical: nr = 7 - r; break;
    case Symmetry::kFlipDiagonal: nr = c; nc = r; break;
    case Symmetry::kFlipAntiDiagonal: nr = 7 - c; nc = 7 - r; break;
  }
  return Square::at(nc + 1, nr + 1);
}

Bitboard transform(Bitboard b, Symmetry s) {
  Bitboard out = 0;
  for (Square sq : squares_of(b)) out |= transform(sq, s).bit();
  return out;
}

Position transform(const Position& pos, Symmetry s) {
  return Position::from_masks(transform(pos.black(), s),
                              transform(pos.white(), s), pos.to_move(),
                              pos.ply());
}

Move transform(Move mv, Symmetry s) {
  return mv.is_pass() ? mv : Move::place(transform(mv.square(), s));
}

std::string render(const Position& pos) {
  std::ostringstream out;
  out << "  A B C D E F G H\n";
  for (int row = 1; row <= 8; ++row) {
    out << row;
    for (int col = 1; col <= 8; ++col) {
      const auto disc = pos.at(Square::at(col, row));
      out << ' ' << (!disc ? '.' : (*disc == Player::kBlack ? 'X' : 'O'));
    }
    out << '\n';
  }
  const Score s = score(pos);
  out << "Black " << s.black << "  White " << s.white << "  ply " << pos.ply()
      << "  " << to_string(pos.to_move()) << " to move\n";
  return out.str();
}

}  // namespace othello
