#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "othello/notation.hpp"

namespace othello {

using Token = std::int32_t;
using TokenSequence = std::vector<Token>;

// Move-level vocabulary: BOS, EOS, PASS, then the 64 squares in canonical
// index order.
namespace vocab {
inline constexpr Token kBos = 0;
inline constexpr Token kEos = 1;
inline constexpr Token kPass = 2;
inline constexpr Token kFirstSquare = 3;
inline constexpr Token kSize = 67;

constexpr Token from_square(Square sq) noexcept { return kFirstSquare + sq.index(); }
constexpr bool is_square(Token t) noexcept {
  return t >= kFirstSquare && t < kSize;
}
constexpr Square to_square(Token t) { return Square::from_index(t - kFirstSquare); }

Token from_move(Move mv) noexcept;
// Text form of a token: "<|startoftext|>", "<|endoftext|>", "--" or "F5".
std::string text(Token t);
}  // namespace vocab

// Uniform-random legal self-play. Forced passes are recorded as explicit
// Pass moves. Deterministic per seed; game i uses its own derived stream.
std::vector<GameRecord> synthesize_games(int n, std::uint64_t seed);
GameRecord synthesize_game(std::uint64_t seed, int index);

// [BOS] + one token per move + [EOS].
TokenSequence encode_game(const GameRecord& rec);
TokenSequence encode_moves(const std::vector<Move>& moves);

// Compact transcript of the span between the first BOS (or the start, when
// there is none) and the first EOS. A stray BOS inside that span renders as
// the literal "BOS" so downstream replay flags it. Throws Malformed for ids
// outside the vocabulary.
std::string decode_tokens(const TokenSequence& tokens);

struct Dataset {
  std::vector<TokenSequence> sequences;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  // Index of each sequence in the source record list.
  std::vector<std::size_t> source_index;
  std::uint64_t seed = 0;
};

// Uniform subsample without replacement, then a seeded train/validation
// split. Throws InsufficientRecords if sample_n > records.size() and
// InvalidConfig if val_fraction is outside [0, 1).
Dataset build_dataset(const std::vector<GameRecord>& records,
                      std::size_t sample_n, double val_fraction,
                      std::uint64_t seed);

struct DatasetStats {
  std::size_t games = 0;
  std::size_t total_tokens = 0;
  double mean_length = 0.0;
  std::size_t max_length = 0;
};

DatasetStats dataset_stats(const Dataset& ds);

// DIR/corpus.txt holds one delimiter-wrapped Compact transcript per line;
// DIR/dataset.json holds the seed, counts and split indices.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace othello
