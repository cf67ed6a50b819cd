#include "othello/lm/train.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "othello/rng.hpp"

namespace othello::lm {

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be positive");
  }
  if (steps < 0) throw Error(ErrorCode::kInvalidConfig, "steps must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "Adam moments out of range");
  }
  if (record_every < 1) throw Error(ErrorCode::kInvalidConfig, "record_every must be >= 1");
  if (clip_norm < 0.0 || eval_every < 0 || eval_max_sequences < 0 ||
      early_stop_patience < 0) {
    throw Error(ErrorCode::kInvalidConfig, "negative training option");
  }
}

double evaluate_loss(const Model<float>& model,
                     const std::vector<TokenSequence>& sequences, int batch_size) {
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<TokenSequence> chunk, inputs, targets;
  for (std::size_t i = 0; i < sequences.size(); i += static_cast<std::size_t>(batch_size)) {
    const auto end = std::min(sequences.size(), i + static_cast<std::size_t>(batch_size));
    chunk.assign(sequences.begin() + static_cast<std::ptrdiff_t>(i),
                 sequences.begin() + static_cast<std::ptrdiff_t>(end));
    next_token_pairs(chunk, inputs, targets);
    if (inputs.empty()) continue;
    std::size_t n = 0;
    for (const auto& t : targets) n += t.size();
    total += loss(forward(model, inputs), targets) * static_cast<double>(n);
    counted += n;
  }
  if (counted == 0) throw Error(ErrorCode::kEmptyInput, "no tokens to evaluate");
  return total / static_cast<double>(counted);
}

TrainResult train(Model<float>& model, const Dataset& dataset,
                  const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  TrainResult result;
  if (cfg.steps == 0) return result;
  if (dataset.train.empty()) {
    throw Error(ErrorCode::kEmptyInput, "training split is empty");
  }

  std::vector<TokenSequence> validation;
  for (std::size_t idx : dataset.validation) {
    if (static_cast<int>(validation.size()) >= cfg.eval_max_sequences) break;
    validation.push_back(dataset.sequences[idx]);
  }

  auto params = model.parameters();
  const std::size_t n_params = params.size();
  std::vector<float> m(n_params, 0.0f);
  std::vector<float> v(n_params, 0.0f);
  std::vector<float> best_params;
  int evals_without_improvement = 0;

  Rng rng(derive_seed(cfg.seed, 0x747261696eULL));
  std::vector<std::size_t> order = dataset.train;
  std::size_t cursor = order.size();

  std::vector<TokenSequence> batch, inputs, targets;
  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  double window_sum = 0.0;
  int window_steps = 0;
  for (int step = 1; step <= cfg.steps; ++step) {
    batch.clear();
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor >= order.size()) {
        shuffle_in_place(order, rng);
        cursor = 0;
      }
      batch.push_back(dataset.sequences[order[cursor++]]);
    }
    next_token_pairs(batch, inputs, targets);
    auto lg = loss_and_gradient(model, inputs, targets);

    double norm_sq = 0.0;
    for (float gi : lg.gradient) norm_sq += static_cast<double>(gi) * gi;
    if (!std::isfinite(lg.loss) || !std::isfinite(norm_sq)) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite loss or gradient at step " + std::to_string(step) +
                      " (loss " + std::to_string(lg.loss) + ", grad norm^2 " +
                      std::to_string(norm_sq) + ")");
    }
    float clip = 1.0f;
    const double norm = std::sqrt(norm_sq);
    if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
      clip = static_cast<float>(cfg.clip_norm / norm);
    }

    beta1_pow *= cfg.beta1;
    beta2_pow *= cfg.beta2;
    const auto b1 = static_cast<float>(cfg.beta1);
    const auto b2 = static_cast<float>(cfg.beta2);
    const auto lr_t = static_cast<float>(cfg.learning_rate * std::sqrt(1.0 - beta2_pow) /
                                         (1.0 - beta1_pow));
    const auto eps_t = static_cast<float>(cfg.epsilon * std::sqrt(1.0 - beta2_pow));
    for (std::size_t i = 0; i < n_params; ++i) {
      const float gi = lg.gradient[i] * clip;
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
      params[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps_t);
    }

    LossPoint point{step, lg.loss, std::nullopt};
    bool stop = false;
    if (cfg.eval_every > 0 && !validation.empty() &&
        (step % cfg.eval_every == 0 || step == cfg.steps)) {
      const double val = evaluate_loss(model, validation);
      point.val_loss = val;
      if (!result.best_val_loss || val < *result.best_val_loss) {
        result.best_val_loss = val;
        evals_without_improvement = 0;
        if (cfg.early_stop_patience > 0) best_params.assign(params.begin(), params.end());
      } else if (cfg.early_stop_patience > 0 &&
                 ++evals_without_improvement >= cfg.early_stop_patience) {
        std::copy(best_params.begin(), best_params.end(), params.begin());
        stop = true;
      }
    }
    window_sum += lg.loss;
    ++window_steps;
    if (step % cfg.record_every == 0 || point.val_loss || stop || step == cfg.steps) {
      result.curve.push_back({step, window_sum / window_steps, point.val_loss});
      window_sum = 0.0;
      window_steps = 0;
    }
    result.steps_run = step;
    if (on_step) on_step(point);
    if (stop) break;
  }
  return result;
}

void write_loss_curve(std::ostream& out, const std::vector<LossPoint>& curve) {
  for (const LossPoint& p : curve) {
    nlohmann::ordered_json j;
    j["step"] = p.step;
    j["train_loss"] = p.train_loss;
    if (p.val_loss) j["val_loss"] = *p.val_loss;
    out << j.dump() << '\n';
  }
}

std::vector<LossPoint> read_loss_curve(std::istream& in) {
  std::vector<LossPoint> curve;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LossPoint p;
      p.step = j.at("step").get<int>();
      p.train_loss = j.at("train_loss").get<double>();
      if (j.contains("val_loss")) p.val_loss = j.at("val_loss").get<double>();
      curve.push_back(p);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kMalformed, std::string("loss curve: ") + e.what());
    }
  }
  return curve;
}

}  // namespace othello::lm
