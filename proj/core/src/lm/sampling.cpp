#include "othello/lm/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace othello::lm {

void SampleConfig::validate(int context_len) const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidConfig, "temperature must be positive");
  }
  if (top_k < 0 || top_k > vocab::kSize) {
    throw Error(ErrorCode::kInvalidConfig, "top_k must lie in [0, V]");
  }
  if (max_tokens < 1 || max_tokens > context_len) {
    throw Error(ErrorCode::kInvalidConfig, "max_tokens must lie in [1, context]");
  }
}

std::vector<double> sampling_distribution(std::span<const float> logits,
                                          const SampleConfig& cfg,
                                          std::span<const bool> allowed) {
  const std::size_t v = logits.size();
  if (!allowed.empty() && allowed.size() != v) {
    throw Error(ErrorCode::kShapeMismatch, "mask width differs from logits");
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < v; ++i) {
    if (allowed.empty() || allowed[i]) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw Error(ErrorCode::kEmptyInput, "no token is allowed");
  }
  if (cfg.top_k > 0 && static_cast<std::size_t>(cfg.top_k) < candidates.size()) {
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    candidates.resize(static_cast<std::size_t>(cfg.top_k));
  }
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i : candidates) {
    mx = std::max(mx, static_cast<double>(logits[i]) / cfg.temperature);
  }
  std::vector<double> probs(v, 0.0);
  double sum = 0.0;
  for (std::size_t i : candidates) {
    const double e = std::exp(static_cast<double>(logits[i]) / cfg.temperature - mx);
    probs[i] = e;
    sum += e;
  }
  for (double& p : probs) p /= sum;
  return probs;
}

Token sample_from_logits(std::span<const float> logits, const SampleConfig& cfg,
                         Rng& rng, std::span<const bool> allowed) {
  const auto probs = sampling_distribution(logits, cfg, allowed);
  const double u = uniform01(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    cumulative += probs[i];
    last_positive = i;
    if (u < cumulative) return static_cast<Token>(i);
  }
  return static_cast<Token>(last_positive);
}

Token sample_next(const Model<float>& model, const TokenSequence& context,
                  const SampleConfig& cfg, Rng& rng) {
  if (static_cast<int>(context.size()) >= model.config().context) {
    throw Error(ErrorCode::kContextFull, "context already fills the model window");
  }
  if (context.empty()) {
    throw Error(ErrorCode::kShapeMismatch, "sampling needs a non-empty context");
  }
  const auto logits = forward(model, {context});
  const auto& last = logits.front();
  const auto row = last.row(last.rows() - 1);
  return sample_from_logits(std::span<const float>(row.data(), static_cast<std::size_t>(row.size())),
                            cfg, rng);
}

TokenSequence generate_tokens(const Model<float>& model, const SampleConfig& cfg,
                              Rng& rng) {
  cfg.validate(model.config().context);
  Decoder<float> decoder(model);
  TokenSequence tokens{vocab::kBos};
  while (static_cast<int>(tokens.size()) < cfg.max_tokens) {
    const auto& logits = decoder.step(tokens.back());
    const Token next = sample_from_logits(
        std::span<const float>(logits.data(), static_cast<std::size_t>(logits.size())), cfg, rng);
    tokens.push_back(next);
    if (next == vocab::kEos) break;
  }
  return tokens;
}

std::string generate_game(const Model<float>& model, const SampleConfig& cfg, Rng& rng) {
  return decode_tokens(generate_tokens(model, cfg, rng));
}

std::vector<std::string> generate_games(const Model<float>& model, int n,
                                        const SampleConfig& cfg) {
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    out.push_back(generate_game(model, cfg, rng));
  }
  return out;
}

}  // namespace othello::lm
