// Acceptance suite: one PASS/FAIL line per primary criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "naive_engine.hpp"
#include "othello/board.hpp"
#include "othello/corpus.hpp"
#include "othello/evaluation.hpp"
#include "othello/lm/checkpoint.hpp"
#include "othello/lm/model.hpp"
#include "othello/lm/sampling.hpp"
#include "othello/lm/train.hpp"
#include "othello/notation.hpp"

#ifndef OTHELLO_CLI_PATH
#define OTHELLO_CLI_PATH "othello"
#endif

namespace fs = std::filesystem;
using namespace othello;
using testing_support::kChampionshipTranscript;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double time_limit_s;  // 0: no limit beyond "instant"
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << v;
  return ss.str();
}

// Collects sub-checks; the first failure is kept for the report line.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && first_failure_.empty()) first_failure_ = what;
    pass_ = pass_ && ok;
  }
  void note(const std::string& s) { notes_ += (notes_.empty() ? "" : "; ") + s; }
  Outcome outcome() const {
    return {pass_, pass_ ? notes_ : "failed: " + first_failure_ + (notes_.empty() ? "" : " | " + notes_)};
  }

 private:
  bool pass_ = true;
  std::string first_failure_;
  std::string notes_;
};

// --- engine -----------------------------------------------------------------

Outcome engine_first_moves() {
  std::set<std::string> got;
  for (Square s : legal_moves(initial_position())) got.insert(s.name());
  const std::set<std::string> want{"D3", "C4", "F5", "E6"};
  return {got == want, "legal(initial) = {D3, C4, F5, E6}"};
}

Outcome engine_perft_and_agreement() {
  Checks c;
  std::string counts;
  for (int d = 1; d <= 6; ++d) {
    const auto fast = perft(initial_position(), d);
    const auto slow = naive::perft(naive::Board::initial(), d);
    c.expect(fast == slow, "perft(" + std::to_string(d) + ") differs from naive engine");
    counts += (d > 1 ? "," : "") + std::to_string(fast);
  }
  c.expect(perft(initial_position(), 1) == 4, "perft(1) != 4");
  c.note("perft 1..6 = " + counts);

  int positions = 0;
  for (const naive::Board& nb : testing_support::random_positions(10000, 2024)) {
    const Position pos = testing_support::to_position(nb);
    std::set<int> fast;
    for (Square s : legal_moves(pos)) fast.insert(s.index());
    bool same = fast == nb.legal();
    for (int i : nb.legal()) {
      same = same && apply(pos, Move::place(Square::from_index(i))) ==
                         testing_support::to_position(nb.play(i));
    }
    same = same && is_terminal(pos) == nb.terminal();
    c.expect(same, "disagreement with naive engine at position " + std::to_string(positions));
    ++positions;
  }
  c.note(std::to_string(positions) + " random positions agree");
  return c.outcome();
}

Outcome engine_symmetry() {
  Checks c;
  int checked = 0;
  for (const naive::Board& nb : testing_support::random_positions(1000, 77)) {
    const Position pos = testing_support::to_position(nb);
    const auto moves = legal_moves(pos);
    for (Symmetry s : kAllSymmetries) {
      const Position image = transform(pos, s);
      std::set<int> expected, actual;
      for (Square m : moves) expected.insert(transform(m, s).index());
      for (Square m : legal_moves(image)) actual.insert(m.index());
      bool ok = expected == actual;
      for (Square m : moves) {
        ok = ok && apply(image, Move::place(transform(m, s))) ==
                       transform(apply(pos, Move::place(m)), s);
      }
      c.expect(ok, "symmetry broken at position " + std::to_string(checked));
    }
    ++checked;
  }
  c.note(std::to_string(checked) + " positions x 8 symmetries");
  return c.outcome();
}

// --- notation ---------------------------------------------------------------

Outcome notation_round_trip() {
  Checks c;
  int games = 0;
  for (const GameRecord& rec : synthesize_games(1000, 4242)) {
    for (TranscriptForm form : {TranscriptForm::kNumbered, TranscriptForm::kCompact}) {
      const std::string text = serialize_transcript(rec.moves, form);
      c.expect(parse_transcript(text) == rec.moves, "round trip failed (bare)");
      c.expect(parse_transcript(wrap_delimiters(text)) == rec.moves, "round trip failed (wrapped)");
      c.expect(strip_delimiters(wrap_delimiters(text)) == text, "strip(wrap(t)) != t");
    }
    ++games;
  }
  const auto moves = parse_transcript(kChampionshipTranscript);
  c.expect(moves.size() == 60, "reference transcript does not parse to 60 moves");
  const LegalityReport r = validate_transcript(kChampionshipTranscript);
  c.expect(r.failure == Failure::kNone, "reference transcript has a failure");
  c.expect(is_terminal(r.final_position), "reference transcript does not end terminal");
  const Score s = score(r.final_position);
  c.expect(s.black + s.white + s.empties() == 64, "disc totals + empties != 64");
  c.note(std::to_string(games) + " games round-trip in both forms; reference game " +
         std::to_string(moves.size()) + " moves, final " + format_result(s) + ", " +
         std::to_string(s.empties()) + " empty");
  return c.outcome();
}

// --- model numerics ---------------------------------------------------------

lm::ModelConfig one_layer() {
  lm::ModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 2;
  cfg.dim = 16;
  cfg.seed = 9;
  return cfg;
}

Outcome model_numerics() {
  Checks c;
  const auto gc = lm::gradient_check(one_layer());
  c.expect(gc.max_relative_error <= 1e-4, "gradient check error " + fmt(gc.max_relative_error));
  c.note("grad check max rel err " + fmt(gc.max_relative_error, 3) + " over " +
         std::to_string(gc.parameters_checked) + " params");

  {
    lm::ModelConfig cfg = one_layer();
    cfg.layers = 2;
    const lm::Model<float> m(cfg);
    const TokenSequence seq{0, 40, 27, 30, 41, 12, 9, 50, 20, 33, 1};
    const auto base = lm::forward(m, {seq})[0];
    bool causal = true;
    for (std::size_t k = 1; k < seq.size(); ++k) {
      TokenSequence changed = seq;
      changed[k] = changed[k] == 5 ? 6 : 5;
      const auto out = lm::forward(m, {changed})[0];
      for (std::size_t t = 0; t < k; ++t) {
        causal = causal && (out.row(long(t)).array() == base.row(long(t)).array()).all();
      }
    }
    c.expect(causal, "logits changed before a perturbed position");
    c.note("causality exact");
  }

  {
    lm::Model<float> m(one_layer());
    auto p = m.parameters();
    std::fill(p.begin() + long(m.offsets().head), p.end(), 0.0f);
    std::vector<TokenSequence> inputs, targets;
    lm::next_token_pairs({encode_moves(parse_transcript(kChampionshipTranscript))}, inputs,
                         targets);
    const double l = lm::loss(lm::forward(m, inputs), targets);
    c.expect(std::abs(l - std::log(67.0)) <= 1e-6, "uniform loss " + fmt(l, 10));
    c.note("uniform loss - ln 67 = " + fmt(l - std::log(67.0), 2));
  }

  {
    const lm::Model<float> m(lm::ModelConfig{});
    const lm::Model<float> back = lm::deserialize_checkpoint(lm::serialize_checkpoint(m));
    const auto& a = m.parameters();
    const auto& b = back.parameters();
    const bool same = a.size() == b.size() &&
                      std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0 &&
                      back.config() == m.config();
    c.expect(same, "checkpoint round trip not bit-identical");
    const TokenSequence probe{0, 40, 27, 30};
    c.expect(lm::forward(m, {probe})[0] == lm::forward(back, {probe})[0],
             "reloaded checkpoint gives different logits");
    c.note("checkpoint bit-identical");
  }

  {
    const auto records = synthesize_games(64, 5);
    const Dataset ds = build_dataset(records, records.size(), 0.25, 5);
    lm::TrainConfig tc;
    tc.steps = 40;
    tc.batch_size = 8;
    tc.eval_every = 10;
    tc.seed = 5;
    std::string bytes[2];
    for (auto& b : bytes) {
      lm::Model<float> m(one_layer());
      lm::train(m, ds, tc);
      b = lm::serialize_checkpoint(m);
    }
    c.expect(bytes[0] == bytes[1], "training is not bit-reproducible");
    c.note("training bit-reproducible");
  }
  return c.outcome();
}

// --- learning behaviour -----------------------------------------------------

struct TrainedRun {
  lm::Model<float> model;
  lm::TrainResult result;
};

std::vector<LegalityReport> evaluate_all(const std::vector<std::string>& transcripts) {
  std::vector<LegalityReport> out;
  for (const auto& t : transcripts) out.push_back(validate_transcript(t));
  return out;
}

Outcome learning_overfit() {
  Checks c;
  const auto records = synthesize_games(32, 3232);
  const Dataset ds = build_dataset(records, records.size(), 0.0, 32);
  lm::ModelConfig mc;
  mc.seed = 32;
  lm::Model<float> model(mc);
  lm::TrainConfig tc;
  tc.steps = 2000;
  tc.batch_size = 16;
  tc.eval_every = 0;
  tc.seed = 32;
  lm::train(model, ds, tc);
  const double loss = lm::evaluate_loss(model, ds.sequences);
  c.expect(loss < 0.2, "train loss " + fmt(loss));

  lm::SampleConfig sc;
  sc.temperature = 0.1;
  sc.seed = 320;
  const auto agg = completion_stats(evaluate_all(lm::generate_games(model, 50, sc)));
  c.expect(agg.completion_median >= 0.8, "median completion " + fmt(agg.completion_median));
  c.note("train loss after 2000 steps " + fmt(loss) + "; median completion at T=0.1 " +
         fmt(agg.completion_median) + " over 50 samples");
  return c.outcome();
}

class GeneralizationRun {
 public:
  explicit GeneralizationRun(fs::path work) : work_(std::move(work)) {}

  const TrainedRun& get() {
    if (!run_) {
      const auto records = synthesize_games(20000, 20000);
      const Dataset ds = build_dataset(records, records.size(), 0.05, 20);
      lm::ModelConfig mc;
      mc.seed = 20;
      lm::Model<float> model(mc);
      lm::TrainConfig tc;
      tc.steps = 3000;
      tc.batch_size = 16;
      tc.eval_every = 500;
      tc.record_every = 10;
      tc.seed = 20;
      auto result = lm::train(model, ds, tc);
      fs::create_directories(work_);
      std::ofstream out(curve_path());
      lm::write_loss_curve(out, result.curve);
      run_.emplace(TrainedRun{std::move(model), std::move(result)});
    }
    return *run_;
  }

  fs::path curve_path() const { return work_ / "generalization.loss.jsonl"; }

 private:
  fs::path work_;
  std::optional<TrainedRun> run_;
};

Outcome learning_generalization(GeneralizationRun& g) {
  Checks c;
  const TrainedRun& run = g.get();
  lm::SampleConfig sc;
  sc.temperature = 1.0;
  sc.seed = 200;
  const auto agg = completion_stats(evaluate_all(lm::generate_games(run.model, 200, sc)));
  const auto base = random_baseline(10000, 10000);
  const double ratio = agg.completion_mean / base.completion_mean;
  c.expect(agg.completion_mean >= 5.0 * base.completion_mean,
           "mean " + fmt(agg.completion_mean) + " < 5 x baseline " + fmt(base.completion_mean));
  c.note("mean completion " + fmt(agg.completion_mean) + " vs random baseline " +
         fmt(base.completion_mean) + " (" + fmt(ratio, 3) + "x); " +
         std::to_string(agg.full_games) + "/200 complete games");
  return c.outcome();
}

Outcome learning_loss_curve(GeneralizationRun& g) {
  Checks c;
  g.get();
  std::ifstream in(g.curve_path());
  const auto curve = lm::read_loss_curve(in);
  c.expect(curve.size() >= 100, "fewer than 100 recorded points");
  if (curve.size() < 100) return c.outcome();
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 10 <= 100; ++i) {
    double sum = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) sum += curve[j].train_loss;
    smooth.push_back(sum / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) {
    c.expect(smooth[i] < smooth[i - 1], "smoothed curve rises at point " + std::to_string(i));
  }
  c.note("JSON-lines curve, " + std::to_string(curve.size()) + " points; smoothed " +
         fmt(smooth.front()) + " -> " + fmt(smooth.back()) + " over first 100");
  return c.outcome();
}

// --- evaluator --------------------------------------------------------------

Outcome evaluator_taxonomy() {
  Checks c;
  auto expect_failure = [&](const std::string& text, Failure kind, int ply) {
    const auto r = validate_transcript(text);
    c.expect(r.failure == kind && r.failure_ply == ply,
             "'" + text.substr(0, 20) + "' -> " + std::string(to_string(r.failure)));
  };
  expect_failure("1. F5 F5", Failure::kOccupiedSquare, 2);
  expect_failure("1. F5 A1", Failure::kNoFlank, 2);
  expect_failure("F5 D6 Q9", Failure::kBadToken, 3);
  expect_failure(kChampionshipTranscript + " A1", Failure::kOverrun, 61);

  const GameRecord game = synthesize_game(77, 0);
  std::vector<Move> placements;
  for (const Move& m : game.moves) {
    if (!m.is_pass()) placements.push_back(m);
  }
  auto ratio_after = [&](std::size_t n) {
    std::string text = serialize_transcript({placements.begin(), placements.begin() + long(n)},
                                            TranscriptForm::kCompact);
    return validate_transcript(text + " " + placements.front().square().name()).completion_ratio;
  };
  const double r43 = ratio_after(43);
  const double r27 = ratio_after(27);
  c.expect(std::round(r43 * 1000) / 10 == 71.7, "43/60 -> " + fmt(r43 * 100) + "%");
  c.expect(std::round(r27 * 1000) / 10 == 45.0, "27/60 -> " + fmt(r27 * 100) + "%");
  c.note("OccupiedSquare@2, NoFlank@2, BadToken@3, Overrun@61; 43/60 -> " + fmt(r43 * 100, 3) +
         "%, 27/60 -> " + fmt(r27 * 100, 3) + "%");
  return c.outcome();
}

// --- pipeline ---------------------------------------------------------------

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

Outcome pipeline_end_to_end(const fs::path& cli, const fs::path& work) {
  Checks c;
  const std::vector<std::string> steps = {
      "synth --games 20000 --seed 7 --out games.pgn",
      "ingest --archive games.pgn --sample 20000 --seed 7 --out data",
      "train --data data --steps 300 --layers 2 --heads 2 --dim 64 --seed 7 --out model.ckpt",
      "generate --ckpt model.ckpt --n 1000 --seed 7 --out generated.txt",
      "eval --in generated.txt --out eval",
  };
  std::map<std::string, std::string> trees[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = work / (run == 0 ? "pipeline-a" : "pipeline-b");
    const fs::path log = work / (run == 0 ? "pipeline-a.log" : "pipeline-b.log");
    fs::remove_all(dir);
    fs::create_directories(dir);
    c.expect(fs::is_empty(dir), "run directory not empty");
    for (const auto& step : steps) {
      const std::string cmd = "cd '" + dir.string() + "' && '" + cli.string() + "' " + step +
                              " >>'" + log.string() + "' 2>&1";
      const int rc = std::system(cmd.c_str());
      c.expect(rc == 0, "'" + step.substr(0, step.find(' ')) + "' exited with " +
                            std::to_string(rc) + " (see " + log.string() + ")");
      if (rc != 0) return c.outcome();
    }
    trees[run] = snapshot_tree(dir);
  }
  c.expect(trees[0] == trees[1], "reruns differ");
  const auto it = trees[0].find("eval/summary.json");
  c.expect(it != trees[0].end(), "eval/summary.json missing");
  if (it != trees[0].end()) {
    const auto summary = nlohmann::json::parse(it->second);
    c.expect(summary["n_games"] == 1000, "summary does not cover 1000 games");
    c.note("mean completion " + fmt(summary["completion"]["mean"].get<double>()));
  }
  c.note(std::to_string(trees[0].size()) + " output files byte-identical across reruns");
  return c.outcome();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::vector<std::string> only;
  fs::path cli = OTHELLO_CLI_PATH;
  fs::path work = fs::temp_directory_path() / "othello-acceptance";
  bool list = false;
  app.add_option("--only", only, "Run criteria whose name contains one of these strings");
  app.add_option("--cli", cli, "Path to the othello command-line tool");
  app.add_option("--work", work, "Scratch directory");
  app.add_flag("--list", list, "List criteria and exit");
  CLI11_PARSE(app, argc, argv);

  GeneralizationRun generalization(work);
  const std::vector<Criterion> criteria = {
      {"engine.first-moves", 1, engine_first_moves},
      {"engine.perft-and-naive-agreement", 60, engine_perft_and_agreement},
      {"engine.dihedral-symmetry", 60, engine_symmetry},
      {"notation.round-trip-and-reference-game", 30, notation_round_trip},
      {"model.numerics", 120, model_numerics},
      {"learning.overfit-32-games", 600, learning_overfit},
      {"learning.generalization-vs-random", 2700,
       [&] { return learning_generalization(generalization); }},
      {"learning.loss-curve-decreasing", 0, [&] { return learning_loss_curve(generalization); }},
      {"evaluator.taxonomy-and-arithmetic", 1, evaluator_taxonomy},
      {"pipeline.end-to-end-deterministic", 0, [&] { return pipeline_end_to_end(cli, work); }},
  };

  int failed = 0;
  int ran = 0;
  for (const auto& crit : criteria) {
    if (list) {
      std::printf("%s\n", crit.name.c_str());
      continue;
    }
    if (!only.empty() && std::none_of(only.begin(), only.end(), [&](const std::string& s) {
          return crit.name.find(s) != std::string::npos;
        })) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = crit.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (crit.time_limit_s > 0 && secs > crit.time_limit_s) {
      out.pass = false;
      out.detail += " [over the " + fmt(crit.time_limit_s) + " s budget]";
    }
    std::printf("%s  %-38s %8.1fs  %s\n", out.pass ? "PASS" : "FAIL", crit.name.c_str(), secs,
                out.detail.c_str());
    std::fflush(stdout);
    failed += out.pass ? 0 : 1;
    ++ran;
  }
  if (!list) std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
