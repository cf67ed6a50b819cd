#include "othello/json_io.hpp"

#include <fstream>

namespace othello {

nlohmann::ordered_json squares_json(const std::vector<Square>& squares) {
  auto arr = nlohmann::ordered_json::array();
  for (Square sq : squares) arr.push_back(sq.name());
  return arr;
}

nlohmann::ordered_json board_json(const Position& pos) {
  nlohmann::ordered_json j;
  auto rows = nlohmann::ordered_json::array();
  for (int row = 1; row <= kBoardSize; ++row) {
    std::string line;
    for (int col = 1; col <= kBoardSize; ++col) {
      const auto disc = pos.at(Square::at(col, row));
      line += !disc ? '.' : (*disc == Player::kBlack ? 'B' : 'W');
    }
    rows.push_back(line);
  }
  j["cells"] = rows;
  j["to_move"] = to_string(pos.to_move());
  j["ply"] = pos.ply();
  const Score s = score(pos);
  j["score"] = {{"black", s.black}, {"white", s.white}};
  return j;
}

nlohmann::ordered_json to_json(const LegalityReport& r) {
  nlohmann::ordered_json j;
  j["legal_plies"] = r.legal_plies;
  j["claimed_plies"] = r.claimed_plies;
  j["failure"] = to_string(r.failure);
  j["failure_ply"] = r.failure_ply ? nlohmann::ordered_json(*r.failure_ply) : nlohmann::ordered_json(nullptr);
  j["failure_token"] = r.failure_token ? nlohmann::ordered_json(*r.failure_token) : nlohmann::ordered_json(nullptr);
  j["completion_ratio"] = r.completion_ratio;
  j["natural_ratio"] = r.natural_ratio;
  j["terminal"] = is_terminal(r.final_position);
  const Score s = score(r.final_position);
  j["final_score"] = {{"black", s.black}, {"white", s.white}};
  return j;
}

nlohmann::ordered_json to_json(const AggregateReport& a) {
  nlohmann::ordered_json j;
  j["n_games"] = a.n_games;
  j["completion"] = {{"min", a.completion_min},
                     {"max", a.completion_max},
                     {"mean", a.completion_mean},
                     {"median", a.completion_median}};
  j["natural_mean"] = a.natural_mean;
  j["histogram"] = a.histogram;
  nlohmann::ordered_json failures;
  for (const auto& [kind, count] : a.failure_counts) failures[std::string(to_string(kind))] = count;
  j["failure_counts"] = failures;
  j["full_games"] = a.full_games;
  return j;
}

nlohmann::ordered_json to_json(const Timeline& t) {
  nlohmann::ordered_json j;
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : t.entries) {
    entries.push_back({{"ply", e.ply},
                       {"black", e.black},
                       {"white", e.white},
                       {"leader", e.leader ? std::string(to_string(*e.leader)) : "Tie"}});
  }
  j["entries"] = entries;
  j["trail_fraction"] = t.trail_fraction;
  return j;
}

nlohmann::ordered_json to_json(const DatasetStats& s) {
  return {{"games", s.games},
          {"total_tokens", s.total_tokens},
          {"mean_length", s.mean_length},
          {"max_length", s.max_length}};
}

AggregateReport write_evaluation(const std::filesystem::path& dir,
                                 const std::vector<std::string>& transcripts) {
  std::vector<LegalityReport> reports;
  reports.reserve(transcripts.size());
  for (const auto& t : transcripts) reports.push_back(validate_transcript(t));
  const AggregateReport summary = completion_stats(reports);

  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + (dir / name).string());
    return out;
  };
  {
    auto out = open("transcripts.txt");
    for (const auto& t : transcripts) out << t << '\n';
  }
  {
    auto out = open("reports.jsonl");
    for (std::size_t i = 0; i < reports.size(); ++i) {
      nlohmann::ordered_json j;
      j["index"] = i;
      j.update(to_json(reports[i]));
      out << j.dump() << '\n';
    }
  }
  auto out = open("summary.json");
  out << to_json(summary).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed in " + dir.string());
  return summary;
}

}  // namespace othello
