#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "othello/lm/model.hpp"
#include "othello/rng.hpp"

namespace othello::lm {

struct SampleConfig {
  double temperature = 1.0;
  int top_k = 0;  // 0 disables
  // Total tokens including the leading BOS.
  int max_tokens = 128;
  std::uint64_t seed = 0;

  // Throws InvalidConfig. context_len bounds max_tokens.
  void validate(int context_len) const;
};

// Divides by the temperature, keeps the top_k largest (ties broken by lower
// id), and draws from the softmax. `allowed`, when non-empty, masks the
// candidate set; at least one id must be allowed.
Token sample_from_logits(std::span<const float> logits, const SampleConfig& cfg,
                         Rng& rng, std::span<const bool> allowed = {});

// Softmax of logits / temperature after the top-k cut, in double.
std::vector<double> sampling_distribution(std::span<const float> logits,
                                          const SampleConfig& cfg,
                                          std::span<const bool> allowed = {});

// Samples the token following `context` (a full forward pass). Throws
// ContextFull when context.size() >= model context length.
Token sample_next(const Model<float>& model, const TokenSequence& context,
                  const SampleConfig& cfg, Rng& rng);

// BOS, then sampling until EOS or max_tokens, decoded to a Compact
// transcript. No legality filtering.
std::string generate_game(const Model<float>& model, const SampleConfig& cfg,
                          Rng& rng);
TokenSequence generate_tokens(const Model<float>& model, const SampleConfig& cfg,
                              Rng& rng);

// n games; game i draws from its own stream derived from (cfg.seed, i).
std::vector<std::string> generate_games(const Model<float>& model, int n,
                                        const SampleConfig& cfg);

}  // namespace othello::lm
