#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "othello/corpus.hpp"

namespace othello::lm {

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVector = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Flat storage whose base address has the SIMD alignment, so every tensor
// view starts at the same alignment on every run.
template <class T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

struct ModelConfig {
  int layers = 4;
  int heads = 4;
  int dim = 128;
  int context = 128;
  int vocab = vocab::kSize;
  std::uint64_t seed = 0;

  // Throws InvalidConfig.
  void validate() const;
  // Closed-form count; equals the length of the flat parameter vector.
  std::size_t parameter_count() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// One named tensor inside the flat parameter vector. Matrices are row-major
// and multiply activations from the right (x * W). Vectors have rows == 1.
struct TensorInfo {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Fixed parameter order, also the checkpoint order:
//   tok_emb [V,D], pos_emb [C,D],
//   per layer l: h{l}.ln1.gain [D], h{l}.ln1.bias [D], h{l}.attn.q [D,D],
//     h{l}.attn.k [D,D], h{l}.attn.v [D,D], h{l}.attn.out [D,D],
//     h{l}.ln2.gain [D], h{l}.ln2.bias [D], h{l}.mlp.fc [D,4D],
//     h{l}.mlp.fc_bias [4D], h{l}.mlp.proj [4D,D], h{l}.mlp.proj_bias [D],
//   ln_f.gain [D], ln_f.bias [D], head [D,V]
std::vector<TensorInfo> parameter_layout(const ModelConfig& cfg);

struct LayerOffsets {
  std::size_t ln1_gain, ln1_bias, wq, wk, wv, wo;
  std::size_t ln2_gain, ln2_bias, fc, fc_bias, proj, proj_bias;
};

struct Offsets {
  std::size_t tok_emb = 0;
  std::size_t pos_emb = 0;
  std::vector<LayerOffsets> layers;
  std::size_t lnf_gain = 0;
  std::size_t lnf_bias = 0;
  std::size_t head = 0;
  std::size_t total = 0;
};

Offsets parameter_offsets(const ModelConfig& cfg);

// Decoder-only transformer with pre-norm residual blocks, GELU MLPs and an
// untied output projection. Parameters live in one flat vector.
template <class T>
class Model {
 public:
  // Gaussian(0, 0.02) weights, unit norm gains, zero biases. Deterministic
  // per cfg.seed. Throws InvalidConfig.
  explicit Model(const ModelConfig& cfg);
  // Adopts an existing parameter vector (checkpoint loading).
  Model(const ModelConfig& cfg, const std::vector<T>& params);

  const ModelConfig& config() const noexcept { return cfg_; }
  const Offsets& offsets() const noexcept { return offsets_; }
  std::span<T> parameters() noexcept { return params_; }
  std::span<const T> parameters() const noexcept { return params_; }

  template <class U>
  Model<U> cast() const {
    std::vector<U> p(params_.begin(), params_.end());
    return Model<U>(cfg_, p);
  }

 private:
  ModelConfig cfg_;
  Offsets offsets_;
  AlignedVector<T> params_;
};

inline constexpr Token kIgnoreTarget = -1;

// Per-sequence logits, each sequence.size() x V. Throws SequenceTooLong for
// a sequence longer than the context and BadToken for ids outside [0, V).
template <class T>
std::vector<Matrix<T>> forward(const Model<T>& model,
                               const std::vector<TokenSequence>& batch);

// Causal attention probabilities for one sequence: [layer][head], each
// n x n and lower triangular.
template <class T>
std::vector<std::vector<Matrix<T>>> attention_weights(const Model<T>& model,
                                                      const TokenSequence& sequence);

// Mean next-token cross-entropy over targets != kIgnoreTarget. Throws
// ShapeMismatch when the shapes disagree or every target is ignored.
template <class T>
double loss(const std::vector<Matrix<T>>& logits,
            const std::vector<TokenSequence>& targets);

template <class T>
struct LossAndGradient {
  double loss = 0.0;
  std::size_t counted = 0;
  AlignedVector<T> gradient;  // same layout as Model::parameters()
};

template <class T>
LossAndGradient<T> loss_and_gradient(const Model<T>& model,
                                     const std::vector<TokenSequence>& inputs,
                                     const std::vector<TokenSequence>& targets);

// Splits each BOS..EOS sequence into (inputs, targets) shifted by one.
void next_token_pairs(const std::vector<TokenSequence>& sequences,
                      std::vector<TokenSequence>& inputs,
                      std::vector<TokenSequence>& targets);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t parameters_checked = 0;
  std::string worst_tensor;
};

// Compares analytic gradients with central finite differences (h = 1e-5)
// for every parameter, in double precision, on a fixed seeded token
// sequence. The relative error is |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const ModelConfig& cfg);
// Same, for an existing model (used to check special weight settings).
GradientCheckResult gradient_check(const Model<double>& model);

// Incremental decoding with a key/value cache. Produces the same logits as
// forward() on the growing prefix, up to rounding.
template <class T>
class Decoder {
 public:
  explicit Decoder(const Model<T>& model);
  // Feeds the next token and returns logits for the following position.
  // Throws ContextFull when the context is exhausted, BadToken for bad ids.
  const RowVector<T>& step(Token token);
  int length() const noexcept { return length_; }
  void reset() noexcept { length_ = 0; }

 private:
  const Model<T>* model_;
  int length_ = 0;
  std::vector<Matrix<T>> keys_;
  std::vector<Matrix<T>> values_;
  RowVector<T> logits_;
};

}  // namespace othello::lm
