#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "othello/corpus.hpp"
#include "othello/lm/model.hpp"

namespace othello::lm {

struct TrainConfig {
  double learning_rate = 3e-4;
  int steps = 2000;
  int batch_size = 16;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 1.0;
  // Validation loss every eval_every steps (0 disables), over at most
  // eval_max_sequences validation games.
  int eval_every = 100;
  int eval_max_sequences = 256;
  // One curve point per record_every steps, holding the mean training loss
  // since the previous point. Evaluation steps and the last step always get
  // a point.
  int record_every = 1;
  // Stop after this many evaluations without a new best validation loss
  // and restore the best parameters; 0 disables.
  int early_stop_patience = 0;
  std::uint64_t seed = 0;

  // Throws InvalidConfig.
  void validate() const;
};

struct LossPoint {
  int step = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

struct TrainResult {
  std::vector<LossPoint> curve;  // see TrainConfig::record_every
  int steps_run = 0;
  std::optional<double> best_val_loss;
};

using StepCallback = std::function<void(const LossPoint&)>;

// Adam on shuffled minibatches of dataset.train. Single-threaded and
// bit-deterministic for a given (model, dataset, config). Throws EmptyInput
// for an empty training split and NonFinite when a loss or gradient blows
// up.
TrainResult train(Model<float>& model, const Dataset& dataset,
                  const TrainConfig& cfg, const StepCallback& on_step = {});

// Mean loss over the given sequences (BOS..EOS), in batches.
double evaluate_loss(const Model<float>& model,
                     const std::vector<TokenSequence>& sequences,
                     int batch_size = 32);

// JSON-lines: {"step":N,"train_loss":X[,"val_loss":Y]}
void write_loss_curve(std::ostream& out, const std::vector<LossPoint>& curve);
std::vector<LossPoint> read_loss_curve(std::istream& in);

}  // namespace othello::lm
