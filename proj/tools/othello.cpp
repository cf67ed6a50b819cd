// Command-line front end: corpus, training, generation, evaluation and the
// HTTP service.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "othello/board.hpp"
#include "othello/corpus.hpp"
#include "othello/evaluation.hpp"
#include "othello/json_io.hpp"
#include "othello/lm/checkpoint.hpp"
#include "othello/lm/sampling.hpp"
#include "othello/lm/train.hpp"
#include "othello/notation.hpp"
#include "othello/service/server.hpp"

namespace fs = std::filesystem;
using namespace othello;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void print_summary(const AggregateReport& agg) {
  std::cout << to_json(agg).dump(2) << "\n";
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  int games = 1000;
  std::uint64_t seed = 0;
  fs::path out;
};

int run_synth(const SynthArgs& a) {
  const auto records = synthesize_games(a.games, a.seed);
  auto out = open_out(a.out);
  write_archive(out, records);
  std::cerr << "wrote " << records.size() << " games to " << a.out << "\n";
  return 0;
}

// --- ingest -----------------------------------------------------------------

struct IngestArgs {
  fs::path archive;
  std::size_t sample = 20000;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  bool strict = false;
  fs::path out;
};

int run_ingest(const IngestArgs& a) {
  std::ifstream in(a.archive);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + a.archive.string());
  ArchiveOptions opts;
  opts.strict = a.strict;
  const ArchiveContents contents = parse_archive(in, opts);
  for (const auto& issue : contents.issues) {
    std::cerr << a.archive.string() << ":" << issue.line << ": skipped game: " << issue.message
              << "\n";
  }
  const std::size_t n = std::min(a.sample, contents.records.size());
  if (n < a.sample) {
    std::cerr << "archive holds " << contents.records.size() << " usable games; sampling all\n";
  }
  const Dataset ds = build_dataset(contents.records, n, a.val_fraction, a.seed);
  save_dataset(ds, a.out);
  std::cout << to_json(dataset_stats(ds)).dump(2) << "\n";
  return 0;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
  fs::path data;
  fs::path out;
  fs::path curve;
  lm::ModelConfig model;
  lm::TrainConfig train;
  int log_every = 100;
  TrainArgs() { train.record_every = 10; }
};

int run_train(TrainArgs a) {
  const Dataset ds = load_dataset(a.data);
  a.model.seed = a.train.seed;
  lm::Model<float> model(a.model);
  std::cerr << "model: " << model.config().parameter_count() << " parameters, "
            << ds.train.size() << " training games\n";
  const lm::TrainResult result = lm::train(model, ds, a.train, [&](const lm::LossPoint& p) {
    if (a.log_every > 0 && (p.step % a.log_every == 0 || p.val_loss)) {
      std::cerr << "step " << p.step << " loss " << p.train_loss;
      if (p.val_loss) std::cerr << " val " << *p.val_loss;
      std::cerr << "\n";
    }
  });
  lm::save_checkpoint(model, a.out);
  const fs::path curve = a.curve.empty() ? fs::path(a.out.string() + ".loss.jsonl") : a.curve;
  auto out = open_out(curve);
  lm::write_loss_curve(out, result.curve);
  std::cerr << "ran " << result.steps_run << " steps; checkpoint " << a.out << ", curve "
            << curve << "\n";
  return 0;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  fs::path ckpt;
  int n = 200;
  lm::SampleConfig sample;
  fs::path out;
};

int run_generate(const GenerateArgs& a) {
  if (a.n < 1) throw Error(ErrorCode::kInvalidConfig, "--n must be at least 1");
  const lm::Model<float> model = lm::load_checkpoint(a.ckpt);
  const auto games = lm::generate_games(model, a.n, a.sample);
  auto out = open_out(a.out);
  for (const auto& g : games) out << g << "\n";
  std::cerr << "wrote " << games.size() << " transcripts to " << a.out << "\n";
  return 0;
}

// --- eval -------------------------------------------------------------------

int run_eval(const fs::path& in, const fs::path& out) {
  print_summary(write_evaluation(out, read_lines(in)));
  return 0;
}

// --- replay -----------------------------------------------------------------

// The game in FILE: the first record of an archive, or else the first
// non-empty line read as a transcript.
std::vector<Move> load_game(const fs::path& path, std::string& label) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  ArchiveOptions opts;
  opts.validate = false;
  const ArchiveContents contents = parse_archive(in, opts);
  if (!contents.records.empty()) {
    label = contents.records.front().header("Event").value_or(path.filename().string());
    return validate_transcript(serialize_transcript(contents.records.front().moves,
                                                    TranscriptForm::kCompact))
        .applied;
  }
  for (const auto& line : read_lines(path)) {
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    label = path.filename().string();
    const LegalityReport r = validate_transcript(line);
    if (r.failure != Failure::kNone) {
      std::cerr << "transcript stops being legal at ply " << *r.failure_ply << " ("
                << to_string(r.failure) << ")\n";
    }
    return r.applied;
  }
  throw Error(ErrorCode::kEmptyInput, "no game found in " + path.string());
}

int run_replay(const fs::path& game, std::optional<int> ply) {
  std::string label;
  const std::vector<Move> moves = load_game(game, label);
  int placements = 0;
  for (const Move& m : moves) placements += m.is_pass() ? 0 : 1;
  const int upto = std::clamp(ply.value_or(placements), 0, placements);

  std::vector<Move> prefix;
  int seen = 0;
  for (const Move& m : moves) {
    if (!m.is_pass() && seen == upto) break;
    prefix.push_back(m);
    seen += m.is_pass() ? 0 : 1;
  }
  const Position pos = replay(prefix, true);
  std::cout << label << ", ply " << upto << " of " << placements << "\n\n" << render(pos) << "\n";
  if (is_terminal(pos)) std::cout << "game over\n";
  std::cout << "\n";
  const Timeline tl = timeline(prefix);
  std::cout << "ply  move  black  white  leader\n";
  std::size_t k = 0;
  for (const auto& e : tl.entries) {
    while (k < prefix.size() && prefix[k].is_pass()) ++k;
    const std::string mv = k < prefix.size() ? prefix[k++].text() : "";
    std::printf("%3d  %-4s  %5d  %5d  %s\n", e.ply, mv.c_str(), e.black, e.white,
                e.leader ? std::string(to_string(*e.leader)).c_str() : "Tie");
  }
  return 0;
}

// --- baseline / perft -------------------------------------------------------

int run_baseline(int n, std::uint64_t seed) {
  print_summary(random_baseline(n, seed));
  return 0;
}

int run_perft(int depth) {
  for (int d = 1; d <= depth; ++d) {
    std::cout << d << " " << perft(initial_position(), d) << "\n";
  }
  return 0;
}

// --- serve ------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path models;
  std::optional<fs::path> static_dir;
  std::optional<fs::path> jobs_dir;
  std::optional<fs::path> snapshots;
};

int run_serve(const ServeArgs& a) {
  // Shut down cleanly on SIGINT/SIGTERM: a watcher thread owns the signals.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::ModelRegistry models;
  models.load_directory(a.models);
  std::cerr << "loaded " << models.ids().size() << " model(s) from " << a.models << "\n";
  service::SessionManager sessions(models, {a.snapshots});
  service::JobManager jobs(models, a.jobs_dir);
  service::Server server(sessions, jobs, models, {a.static_dir});

  std::jthread watcher([&](std::stop_token) {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  const int port = a.port == 0 ? server.bind_to_any_port(a.host) : a.port;
  std::cerr << "listening on http://" << a.host << ":" << port << "\n";
  const bool ok = a.port == 0 ? server.listen_after_bind() : server.listen(a.host, a.port);
  if (!ok && server.is_running()) return 1;
  // Wake the watcher if the server stopped for another reason.
  pthread_kill(watcher.native_handle(), SIGTERM);
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Othello transcript language-model toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Write random legal self-play games as an archive");
  c_synth->add_option("--games", synth.games)->check(CLI::PositiveNumber);
  c_synth->add_option("--seed", synth.seed);
  c_synth->add_option("--out", synth.out)->required();

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Sample an archive into a training dataset");
  c_ingest->add_option("--archive", ingest.archive)->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--sample", ingest.sample);
  c_ingest->add_option("--seed", ingest.seed);
  c_ingest->add_option("--val-fraction", ingest.val_fraction);
  c_ingest->add_flag("--strict", ingest.strict, "Abort on the first malformed game");
  c_ingest->add_option("--out", ingest.out)->required();

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a model on a dataset directory");
  c_train->add_option("--data", train.data)->required()->check(CLI::ExistingDirectory);
  c_train->add_option("--steps", train.train.steps);
  c_train->add_option("--lr", train.train.learning_rate);
  c_train->add_option("--batch", train.train.batch_size);
  c_train->add_option("--clip", train.train.clip_norm);
  c_train->add_option("--eval-every", train.train.eval_every);
  c_train->add_option("--record-every", train.train.record_every,
                      "Steps averaged into each loss-curve point");
  c_train->add_option("--patience", train.train.early_stop_patience);
  c_train->add_option("--seed", train.train.seed);
  c_train->add_option("--layers", train.model.layers);
  c_train->add_option("--heads", train.model.heads);
  c_train->add_option("--dim", train.model.dim);
  c_train->add_option("--context", train.model.context);
  c_train->add_option("--curve", train.curve, "Loss curve path (default CKPT.loss.jsonl)");
  c_train->add_option("--log-every", train.log_every);
  c_train->add_option("--out", train.out)->required();

  GenerateArgs gen;
  auto* c_gen = app.add_subcommand("generate", "Sample transcripts from a checkpoint");
  c_gen->add_option("--ckpt", gen.ckpt)->required()->check(CLI::ExistingFile);
  c_gen->add_option("--n", gen.n);
  c_gen->add_option("--temperature", gen.sample.temperature);
  c_gen->add_option("--top-k", gen.sample.top_k);
  c_gen->add_option("--seed", gen.sample.seed);
  c_gen->add_option("--out", gen.out)->required();

  fs::path eval_in, eval_out;
  auto* c_eval = app.add_subcommand("eval", "Check transcripts for legality");
  c_eval->add_option("--in", eval_in)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--out", eval_out)->required();

  fs::path replay_game;
  std::optional<int> replay_ply;
  auto* c_replay = app.add_subcommand("replay", "Print the board and score timeline of a game");
  c_replay->add_option("--game", replay_game)->required()->check(CLI::ExistingFile);
  c_replay->add_option("--ply", replay_ply, "Placements to show (default: all)");

  int base_n = 10000;
  std::uint64_t base_seed = 0;
  auto* c_base = app.add_subcommand("baseline", "Evaluate uniformly random transcripts");
  c_base->add_option("--n", base_n)->check(CLI::PositiveNumber);
  c_base->add_option("--seed", base_seed);

  int perft_depth = 6;
  auto* c_perft = app.add_subcommand("perft", "Count leaf positions from the start");
  c_perft->add_option("--depth", perft_depth)->check(CLI::Range(1, 12));

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Run the HTTP/JSON service");
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port, "0 picks a free port");
  c_serve->add_option("--models", serve.models)->required()->check(CLI::ExistingDirectory);
  c_serve->add_option("--static", serve.static_dir)->check(CLI::ExistingDirectory);
  c_serve->add_option("--jobs", serve.jobs_dir, "Directory for generation job artifacts");
  c_serve->add_option("--snapshots", serve.snapshots, "Directory for session snapshots");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_ingest) return run_ingest(ingest);
    if (*c_train) return run_train(train);
    if (*c_gen) return run_generate(gen);
    if (*c_eval) return run_eval(eval_in, eval_out);
    if (*c_replay) return run_replay(replay_game, replay_ply);
    if (*c_base) return run_baseline(base_n, base_seed);
    if (*c_perft) return run_perft(perft_depth);
    if (*c_serve) return run_serve(serve);
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
