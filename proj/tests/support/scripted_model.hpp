#pragma once

#include <utility>
#include <vector>

#include "othello/lm/model.hpp"

namespace testing_support {

// A model whose next-token logits ignore the context. The final norm has
// zero gain and a bias selecting dimension 0, so every position's logits are
// row 0 of the head: `floor` everywhere except the listed tokens.
inline othello::lm::Model<float> constant_logits_model(
    const std::vector<std::pair<othello::Token, float>>& logits, float floor = -40.0f) {
  othello::lm::ModelConfig cfg;
  cfg.layers = 1;
  cfg.heads = 1;
  cfg.dim = 4;
  cfg.seed = 1;
  othello::lm::Model<float> m(cfg);
  const auto& off = m.offsets();
  auto p = m.parameters();
  for (int i = 0; i < cfg.dim; ++i) {
    p[off.lnf_gain + i] = 0.0f;
    p[off.lnf_bias + i] = i == 0 ? 1.0f : 0.0f;
  }
  for (int v = 0; v < cfg.vocab; ++v) p[off.head + v] = floor;
  for (const auto& [token, value] : logits) p[off.head + token] = value;
  return m;
}

}  // namespace testing_support
