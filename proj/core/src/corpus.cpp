#include "othello/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "othello/rng.hpp"

namespace othello {

namespace vocab {

Token from_move(Move mv) noexcept {
  return mv.is_pass() ? kPass : from_square(mv.square());
}

std::string text(Token t) {
  switch (t) {
    case kBos: return std::string(kStartDelimiter);
    case kEos: return std::string(kEndDelimiter);
    case kPass: return std::string(kPassToken);
    default: break;
  }
  if (!is_square(t)) {
    throw Error(ErrorCode::kMalformed, "token id " + std::to_string(t) +
                                           " outside the vocabulary");
  }
  return to_square(t).name();
}

}  // namespace vocab

GameRecord synthesize_game(std::uint64_t seed, int index) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  GameRecord rec;
  Position pos = initial_position();
  while (!is_terminal(pos)) {
    const Bitboard legal = legal_moves_mask(pos);
    Move mv = Move::pass();
    if (legal != 0) {
      const auto squares = squares_of(legal);
      mv = Move::place(squares[uniform_index(rng, squares.size())]);
    }
    pos = apply(pos, mv);
    rec.moves.push_back(mv);
  }
  const Score s = score(pos);
  rec.result = s;
  rec.headers = {{"Event", "Synthetic self-play"},
                 {"Round", std::to_string(index + 1)},
                 {"Black", "random"},
                 {"White", "random"},
                 {"Result", format_result(s)}};
  return rec;
}

std::vector<GameRecord> synthesize_games(int n, std::uint64_t seed) {
  std::vector<GameRecord> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) out.push_back(synthesize_game(seed, i));
  return out;
}

TokenSequence encode_moves(const std::vector<Move>& moves) {
  TokenSequence seq;
  seq.reserve(moves.size() + 2);
  seq.push_back(vocab::kBos);
  for (const Move& mv : moves) seq.push_back(vocab::from_move(mv));
  seq.push_back(vocab::kEos);
  return seq;
}

TokenSequence encode_game(const GameRecord& rec) { return encode_moves(rec.moves); }

std::string decode_tokens(const TokenSequence& tokens) {
  auto begin = std::find(tokens.begin(), tokens.end(), vocab::kBos);
  begin = begin == tokens.end() ? tokens.begin() : begin + 1;
  std::string out;
  for (auto it = begin; it != tokens.end(); ++it) {
    const Token t = *it;
    if (t < 0 || t >= vocab::kSize) {
      throw Error(ErrorCode::kMalformed,
                  "token id " + std::to_string(t) + " outside the vocabulary");
    }
    if (t == vocab::kEos) break;
    if (!out.empty()) out += ' ';
    out += t == vocab::kBos ? std::string("BOS") : vocab::text(t);
  }
  return out;
}

Dataset build_dataset(const std::vector<GameRecord>& records,
                      std::size_t sample_n, double val_fraction,
                      std::uint64_t seed) {
  if (sample_n > records.size()) {
    throw Error(ErrorCode::kInsufficientRecords,
                "requested " + std::to_string(sample_n) + " games from " +
                    std::to_string(records.size()));
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "val_fraction must lie in [0, 1)");
  }
  Rng rng(derive_seed(seed, 0));
  // Partial Fisher-Yates: the first sample_n slots are a uniform sample.
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < sample_n; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, order.size() - i));
    std::swap(order[i], order[j]);
  }
  order.resize(sample_n);

  Dataset ds;
  ds.seed = seed;
  ds.source_index = order;
  ds.sequences.reserve(sample_n);
  for (std::size_t idx : order) ds.sequences.push_back(encode_game(records[idx]));

  std::vector<std::size_t> split(sample_n);
  std::iota(split.begin(), split.end(), std::size_t{0});
  Rng split_rng(derive_seed(seed, 1));
  shuffle_in_place(split, split_rng);
  const auto n_val = static_cast<std::size_t>(
      std::floor(val_fraction * static_cast<double>(sample_n)));
  ds.validation.assign(split.begin(), split.begin() + static_cast<std::ptrdiff_t>(n_val));
  ds.train.assign(split.begin() + static_cast<std::ptrdiff_t>(n_val), split.end());
  std::sort(ds.validation.begin(), ds.validation.end());
  std::sort(ds.train.begin(), ds.train.end());
  return ds;
}

DatasetStats dataset_stats(const Dataset& ds) {
  DatasetStats st;
  st.games = ds.sequences.size();
  for (const auto& seq : ds.sequences) {
    st.total_tokens += seq.size();
    st.max_length = std::max(st.max_length, seq.size());
  }
  if (st.games > 0) {
    st.mean_length =
        static_cast<double>(st.total_tokens) / static_cast<double>(st.games);
  }
  return st;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "corpus.txt", std::ios::binary);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "corpus.txt").string());
    for (const auto& seq : ds.sequences) {
      out << wrap_delimiters(decode_tokens(seq)) << '\n';
    }
  }
  const DatasetStats st = dataset_stats(ds);
  nlohmann::ordered_json meta;
  meta["seed"] = ds.seed;
  meta["games"] = st.games;
  meta["total_tokens"] = st.total_tokens;
  meta["mean_length"] = st.mean_length;
  meta["max_length"] = st.max_length;
  meta["train"] = ds.train;
  meta["validation"] = ds.validation;
  meta["source_index"] = ds.source_index;
  std::ofstream out(dir / "dataset.json", std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / "dataset.json").string());
  out << meta.dump(1) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  std::ifstream corpus(dir / "corpus.txt", std::ios::binary);
  if (!corpus) throw Error(ErrorCode::kIo, "cannot read " + (dir / "corpus.txt").string());
  std::string line;
  while (std::getline(corpus, line)) {
    if (line.empty()) continue;
    ds.sequences.push_back(encode_moves(parse_transcript(line)));
  }
  std::ifstream meta_in(dir / "dataset.json", std::ios::binary);
  if (!meta_in) {
    throw Error(ErrorCode::kIo, "cannot read " + (dir / "dataset.json").string());
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
    ds.seed = meta.at("seed").get<std::uint64_t>();
    ds.train = meta.at("train").get<std::vector<std::size_t>>();
    ds.validation = meta.at("validation").get<std::vector<std::size_t>>();
    ds.source_index = meta.value("source_index", std::vector<std::size_t>{});
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformed, std::string("dataset.json: ") + e.what());
  }
  for (std::size_t idx : ds.train) {
    if (idx >= ds.sequences.size()) {
      throw Error(ErrorCode::kMalformed, "split index beyond corpus size");
    }
  }
  for (std::size_t idx : ds.validation) {
    if (idx >= ds.sequences.size()) {
      throw Error(ErrorCode::kMalformed, "split index beyond corpus size");
    }
  }
  return ds;
}

}  // namespace othello
