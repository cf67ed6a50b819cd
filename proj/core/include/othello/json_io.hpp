#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "othello/board.hpp"
#include "othello/corpus.hpp"
#include "othello/evaluation.hpp"

// JSON shapes shared by the CLI output files and the HTTP service. Squares
// always travel as canonical uppercase names.
namespace othello {

nlohmann::ordered_json to_json(const LegalityReport& r);
nlohmann::ordered_json to_json(const AggregateReport& a);
nlohmann::ordered_json to_json(const Timeline& t);
nlohmann::ordered_json to_json(const DatasetStats& s);

// {"cells": ["........", ...8 rows of 'B'/'W'/'.'], "to_move", "ply", "score"}
nlohmann::ordered_json board_json(const Position& pos);
nlohmann::ordered_json squares_json(const std::vector<Square>& squares);

// Evaluates every transcript and writes DIR/transcripts.txt (one per line),
// DIR/reports.jsonl (one LegalityReport per line) and DIR/summary.json.
// Throws EmptyInput for no transcripts and Io on write failure.
AggregateReport write_evaluation(const std::filesystem::path& dir,
                                 const std::vector<std::string>& transcripts);

}  // namespace othello
