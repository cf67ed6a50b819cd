#include "othello/lm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "othello/rng.hpp"

namespace othello::lm {

namespace {

template <class T>
using CMap = Eigen::Map<const Matrix<T>>;
template <class T>
using CVecMap = Eigen::Map<const RowVector<T>>;
template <class T>
using Map = Eigen::Map<Matrix<T>>;
template <class T>
using VecMap = Eigen::Map<RowVector<T>>;
template <class T>
using Column = Eigen::Matrix<T, Eigen::Dynamic, 1>;

constexpr double kLayerNormEps = 1e-5;
constexpr double kInitStd = 0.02;

}  // namespace

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) {
    throw Error(ErrorCode::kInvalidConfig, msg);
  };
  if (layers <= 0 || heads <= 0 || dim <= 0 || context <= 0 || vocab <= 0) {
    fail("model dimensions must be positive");
  }
  if (dim % heads != 0) {
    fail("dim " + std::to_string(dim) + " is not divisible by heads " +
         std::to_string(heads));
  }
  if (context < 128) fail("context must be at least 128 tokens");
  if (vocab != vocab::kSize) fail("vocab must be " + std::to_string(vocab::kSize));
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t v = static_cast<std::size_t>(vocab);
  const std::size_t c = static_cast<std::size_t>(context);
  const std::size_t l = static_cast<std::size_t>(layers);
  return v * d + c * d + l * (12 * d * d + 9 * d) + 2 * d + d * v;
}

std::vector<TensorInfo> parameter_layout(const ModelConfig& cfg) {
  std::vector<TensorInfo> out;
  std::size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    TensorInfo t{std::move(name), offset, rows, cols};
    offset += t.size();
    out.push_back(std::move(t));
  };
  const int d = cfg.dim;
  add("tok_emb", cfg.vocab, d);
  add("pos_emb", cfg.context, d);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    add(p + "ln1.gain", 1, d);
    add(p + "ln1.bias", 1, d);
    add(p + "attn.q", d, d);
    add(p + "attn.k", d, d);
    add(p + "attn.v", d, d);
    add(p + "attn.out", d, d);
    add(p + "ln2.gain", 1, d);
    add(p + "ln2.bias", 1, d);
    add(p + "mlp.fc", d, 4 * d);
    add(p + "mlp.fc_bias", 1, 4 * d);
    add(p + "mlp.proj", 4 * d, d);
    add(p + "mlp.proj_bias", 1, d);
  }
  add("ln_f.gain", 1, d);
  add("ln_f.bias", 1, d);
  add("head", d, cfg.vocab);
  return out;
}

Offsets parameter_offsets(const ModelConfig& cfg) {
  const auto layout = parameter_layout(cfg);
  Offsets o;
  std::size_t i = 0;
  o.tok_emb = layout[i++].offset;
  o.pos_emb = layout[i++].offset;
  for (int l = 0; l < cfg.layers; ++l) {
    LayerOffsets lo{};
    lo.ln1_gain = layout[i++].offset;
    lo.ln1_bias = layout[i++].offset;
    lo.wq = layout[i++].offset;
    lo.wk = layout[i++].offset;
    lo.wv = layout[i++].offset;
    lo.wo = layout[i++].offset;
    lo.ln2_gain = layout[i++].offset;
    lo.ln2_bias = layout[i++].offset;
    lo.fc = layout[i++].offset;
    lo.fc_bias = layout[i++].offset;
    lo.proj = layout[i++].offset;
    lo.proj_bias = layout[i++].offset;
    o.layers.push_back(lo);
  }
  o.lnf_gain = layout[i++].offset;
  o.lnf_bias = layout[i++].offset;
  o.head = layout[i++].offset;
  o.total = layout.back().offset + layout.back().size();
  return o;
}

template <class T>
Model<T>::Model(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  offsets_ = parameter_offsets(cfg_);
  params_.assign(offsets_.total, T(0));
  Rng rng(derive_seed(cfg_.seed, 0x6d6f64656cULL));
  for (const TensorInfo& t : parameter_layout(cfg_)) {
    const bool is_gain = t.name.ends_with(".gain");
    const bool is_bias = t.name.ends_with("bias");
    for (std::size_t i = 0; i < t.size(); ++i) {
      T value = T(0);
      if (is_gain) {
        value = T(1);
      } else if (!is_bias) {
        value = static_cast<T>(kInitStd * standard_normal(rng));
      }
      params_[t.offset + i] = value;
    }
  }
}

template <class T>
Model<T>::Model(const ModelConfig& cfg, const std::vector<T>& params)
    : cfg_(cfg), params_(params.begin(), params.end()) {
  cfg_.validate();
  offsets_ = parameter_offsets(cfg_);
  if (params_.size() != offsets_.total) {
    throw Error(ErrorCode::kShapeMismatch,
                "parameter vector has " + std::to_string(params_.size()) +
                    " values, config needs " + std::to_string(offsets_.total));
  }
}

namespace {

template <class T>
T gelu(T x) {
  constexpr T c = T(0.7978845608028654);
  const T t = std::tanh(c * (x + T(0.044715) * x * x * x));
  return T(0.5) * x * (T(1) + t);
}

template <class T>
T gelu_grad(T x) {
  constexpr T c = T(0.7978845608028654);
  const T t = std::tanh(c * (x + T(0.044715) * x * x * x));
  return T(0.5) * (T(1) + t) +
         T(0.5) * x * (T(1) - t * t) * c * (T(1) + T(3 * 0.044715) * x * x);
}

template <class T>
void layer_norm(const Matrix<T>& x, const CVecMap<T>& gain, const CVecMap<T>& bias,
                Matrix<T>& xhat, Column<T>& rstd, Matrix<T>& y) {
  const auto rows = x.rows();
  const auto d = static_cast<T>(x.cols());
  xhat.resize(rows, x.cols());
  y.resize(rows, x.cols());
  rstd.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).sum() / d;
    const RowVector<T> centered = x.row(r).array() - mean;
    const T var = centered.squaredNorm() / d;
    const T rs = T(1) / std::sqrt(var + T(kLayerNormEps));
    rstd(r) = rs;
    xhat.row(r) = centered * rs;
    y.row(r) = xhat.row(r).cwiseProduct(gain) + bias;
  }
}

// Accumulates into dx, dgain and dbias.
template <class T>
void layer_norm_backward(const Matrix<T>& dy, const Matrix<T>& xhat,
                         const Column<T>& rstd, const CVecMap<T>& gain,
                         Matrix<T>& dx, VecMap<T> dgain, VecMap<T> dbias) {
  const auto d = static_cast<T>(dy.cols());
  dgain += dy.cwiseProduct(xhat).colwise().sum();
  dbias += dy.colwise().sum();
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const RowVector<T> dxhat = dy.row(r).cwiseProduct(gain);
    const T mean_dxhat = dxhat.sum() / d;
    const T mean_dot = dxhat.dot(xhat.row(r)) / d;
    dx.row(r) += rstd(r) * ((dxhat.array() - mean_dxhat).matrix() - xhat.row(r) * mean_dot);
  }
}

template <class T>
struct LayerCache {
  Matrix<T> x_in, xhat1, a_in, q, k, v, att, x_mid, xhat2, m_in, hpre, hact;
  Column<T> rstd1, rstd2;
  std::vector<Matrix<T>> probs;  // [sequence * heads + head], n x n
};

template <class T>
struct ForwardCache {
  std::vector<std::size_t> offsets;  // batch + 1 row offsets
  std::vector<Token> ids;
  std::vector<int> positions;
  std::vector<LayerCache<T>> layers;
  Matrix<T> x_out, xhatf, xf, logits;
  Column<T> rstdf;
};

template <class T>
void check_batch(const ModelConfig& cfg, const std::vector<TokenSequence>& batch) {
  for (const auto& seq : batch) {
    if (static_cast<int>(seq.size()) > cfg.context) {
      throw Error(ErrorCode::kSequenceTooLong,
                  "sequence of " + std::to_string(seq.size()) +
                      " tokens exceeds context " + std::to_string(cfg.context));
    }
    for (Token t : seq) {
      if (t < 0 || t >= cfg.vocab) {
        throw Error(ErrorCode::kBadToken, "token id " + std::to_string(t) +
                                              " outside the vocabulary");
      }
    }
  }
}

template <class T>
void run_forward(const Model<T>& model, const std::vector<TokenSequence>& batch,
                 ForwardCache<T>& c) {
  const ModelConfig& cfg = model.config();
  check_batch<T>(cfg, batch);
  const Offsets& off = model.offsets();
  const T* p = model.parameters().data();
  const int d = cfg.dim;
  const int heads = cfg.heads;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  c.offsets.assign(1, 0);
  c.ids.clear();
  c.positions.clear();
  for (const auto& seq : batch) {
    for (std::size_t i = 0; i < seq.size(); ++i) {
      c.ids.push_back(seq[i]);
      c.positions.push_back(static_cast<int>(i));
    }
    c.offsets.push_back(c.ids.size());
  }
  const auto rows = static_cast<Eigen::Index>(c.ids.size());

  CMap<T> tok(p + off.tok_emb, cfg.vocab, d);
  CMap<T> pos(p + off.pos_emb, cfg.context, d);
  Matrix<T> x(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    x.row(r) = tok.row(c.ids[static_cast<std::size_t>(r)]) +
               pos.row(c.positions[static_cast<std::size_t>(r)]);
  }

  c.layers.resize(static_cast<std::size_t>(cfg.layers));
  for (int l = 0; l < cfg.layers; ++l) {
    const LayerOffsets& lo = off.layers[static_cast<std::size_t>(l)];
    LayerCache<T>& lc = c.layers[static_cast<std::size_t>(l)];
    lc.x_in = x;
    layer_norm<T>(lc.x_in, CVecMap<T>(p + lo.ln1_gain, d), CVecMap<T>(p + lo.ln1_bias, d),
                  lc.xhat1, lc.rstd1, lc.a_in);
    lc.q.noalias() = lc.a_in * CMap<T>(p + lo.wq, d, d);
    lc.k.noalias() = lc.a_in * CMap<T>(p + lo.wk, d, d);
    lc.v.noalias() = lc.a_in * CMap<T>(p + lo.wv, d, d);
    lc.att.setZero(rows, d);
    lc.probs.assign(batch.size() * static_cast<std::size_t>(heads), Matrix<T>());
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const auto o = static_cast<Eigen::Index>(c.offsets[s]);
      const auto n = static_cast<Eigen::Index>(c.offsets[s + 1] - c.offsets[s]);
      if (n == 0) continue;
      for (int h = 0; h < heads; ++h) {
        const auto col = static_cast<Eigen::Index>(h * hd);
        Matrix<T> scores = lc.q.block(o, col, n, hd) * lc.k.block(o, col, n, hd).transpose();
        Matrix<T>& prob = lc.probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
        prob.setZero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          T mx = -std::numeric_limits<T>::infinity();
          for (Eigen::Index j = 0; j <= i; ++j) mx = std::max(mx, scores(i, j) * scale);
          T sum = T(0);
          for (Eigen::Index j = 0; j <= i; ++j) {
            const T e = std::exp(scores(i, j) * scale - mx);
            prob(i, j) = e;
            sum += e;
          }
          for (Eigen::Index j = 0; j <= i; ++j) prob(i, j) /= sum;
        }
        lc.att.block(o, col, n, hd).noalias() = prob * lc.v.block(o, col, n, hd);
      }
    }
    lc.x_mid = lc.x_in;
    lc.x_mid.noalias() += lc.att * CMap<T>(p + lo.wo, d, d);
    layer_norm<T>(lc.x_mid, CVecMap<T>(p + lo.ln2_gain, d), CVecMap<T>(p + lo.ln2_bias, d),
                  lc.xhat2, lc.rstd2, lc.m_in);
    lc.hpre.noalias() = lc.m_in * CMap<T>(p + lo.fc, d, 4 * d);
    lc.hpre.rowwise() += CVecMap<T>(p + lo.fc_bias, 4 * d);
    lc.hact = lc.hpre.unaryExpr([](T v) { return gelu(v); });
    x = lc.x_mid;
    x.noalias() += lc.hact * CMap<T>(p + lo.proj, 4 * d, d);
    x.rowwise() += CVecMap<T>(p + lo.proj_bias, d);
  }
  c.x_out = std::move(x);
  layer_norm<T>(c.x_out, CVecMap<T>(p + off.lnf_gain, d), CVecMap<T>(p + off.lnf_bias, d),
                c.xhatf, c.rstdf, c.xf);
  c.logits.noalias() = c.xf * CMap<T>(p + off.head, d, cfg.vocab);
}

template <class T>
void run_backward(const Model<T>& model, const ForwardCache<T>& c,
                  const Matrix<T>& dlogits, AlignedVector<T>& grad) {
  const ModelConfig& cfg = model.config();
  const Offsets& off = model.offsets();
  const T* p = model.parameters().data();
  T* g = grad.data();
  const int d = cfg.dim;
  const int heads = cfg.heads;
  const int hd = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const auto rows = dlogits.rows();
  const std::size_t batch = c.offsets.size() - 1;

  Map<T>(g + off.head, d, cfg.vocab).noalias() += c.xf.transpose() * dlogits;
  Matrix<T> dxf = dlogits * CMap<T>(p + off.head, d, cfg.vocab).transpose();
  Matrix<T> dx = Matrix<T>::Zero(rows, d);
  layer_norm_backward<T>(dxf, c.xhatf, c.rstdf, CVecMap<T>(p + off.lnf_gain, d), dx,
                         VecMap<T>(g + off.lnf_gain, d), VecMap<T>(g + off.lnf_bias, d));

  for (int l = cfg.layers - 1; l >= 0; --l) {
    const LayerOffsets& lo = off.layers[static_cast<std::size_t>(l)];
    const LayerCache<T>& lc = c.layers[static_cast<std::size_t>(l)];

    // MLP branch: x_out = x_mid + gelu(m_in * fc + fc_bias) * proj + proj_bias
    Map<T>(g + lo.proj, 4 * d, d).noalias() += lc.hact.transpose() * dx;
    VecMap<T>(g + lo.proj_bias, d) += dx.colwise().sum();
    Matrix<T> dh = dx * CMap<T>(p + lo.proj, 4 * d, d).transpose();
    dh.array() *= lc.hpre.unaryExpr([](T v) { return gelu_grad(v); }).array();
    Map<T>(g + lo.fc, d, 4 * d).noalias() += lc.m_in.transpose() * dh;
    VecMap<T>(g + lo.fc_bias, 4 * d) += dh.colwise().sum();
    const Matrix<T> dm_in = dh * CMap<T>(p + lo.fc, d, 4 * d).transpose();
    layer_norm_backward<T>(dm_in, lc.xhat2, lc.rstd2, CVecMap<T>(p + lo.ln2_gain, d), dx,
                           VecMap<T>(g + lo.ln2_gain, d), VecMap<T>(g + lo.ln2_bias, d));

    // Attention branch: x_mid = x_in + att * wo
    Map<T>(g + lo.wo, d, d).noalias() += lc.att.transpose() * dx;
    const Matrix<T> datt = dx * CMap<T>(p + lo.wo, d, d).transpose();
    Matrix<T> dq = Matrix<T>::Zero(rows, d);
    Matrix<T> dk = Matrix<T>::Zero(rows, d);
    Matrix<T> dv = Matrix<T>::Zero(rows, d);
    for (std::size_t s = 0; s < batch; ++s) {
      const auto o = static_cast<Eigen::Index>(c.offsets[s]);
      const auto n = static_cast<Eigen::Index>(c.offsets[s + 1] - c.offsets[s]);
      if (n == 0) continue;
      for (int h = 0; h < heads; ++h) {
        const auto col = static_cast<Eigen::Index>(h * hd);
        const Matrix<T>& prob = lc.probs[s * static_cast<std::size_t>(heads) + static_cast<std::size_t>(h)];
        const auto datt_h = datt.block(o, col, n, hd);
        const Matrix<T> dprob = datt_h * lc.v.block(o, col, n, hd).transpose();
        dv.block(o, col, n, hd).noalias() += prob.transpose() * datt_h;
        Matrix<T> dscores(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
          const T dot = prob.row(i).dot(dprob.row(i));
          dscores.row(i) = prob.row(i).cwiseProduct((dprob.row(i).array() - dot).matrix()) * scale;
        }
        dq.block(o, col, n, hd).noalias() += dscores * lc.k.block(o, col, n, hd);
        dk.block(o, col, n, hd).noalias() += dscores.transpose() * lc.q.block(o, col, n, hd);
      }
    }
    Map<T>(g + lo.wq, d, d).noalias() += lc.a_in.transpose() * dq;
    Map<T>(g + lo.wk, d, d).noalias() += lc.a_in.transpose() * dk;
    Map<T>(g + lo.wv, d, d).noalias() += lc.a_in.transpose() * dv;
    Matrix<T> da_in = dq * CMap<T>(p + lo.wq, d, d).transpose();
    da_in.noalias() += dk * CMap<T>(p + lo.wk, d, d).transpose();
    da_in.noalias() += dv * CMap<T>(p + lo.wv, d, d).transpose();
    layer_norm_backward<T>(da_in, lc.xhat1, lc.rstd1, CVecMap<T>(p + lo.ln1_gain, d), dx,
                           VecMap<T>(g + lo.ln1_gain, d), VecMap<T>(g + lo.ln1_bias, d));
  }

  Map<T> dtok(g + off.tok_emb, cfg.vocab, d);
  Map<T> dpos(g + off.pos_emb, cfg.context, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    dtok.row(c.ids[static_cast<std::size_t>(r)]) += dx.row(r);
    dpos.row(c.positions[static_cast<std::size_t>(r)]) += dx.row(r);
  }
}

template <class T>
std::vector<Matrix<T>> split_rows(const Matrix<T>& stacked,
                                  const std::vector<std::size_t>& offsets) {
  std::vector<Matrix<T>> out;
  out.reserve(offsets.size() - 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    out.emplace_back(stacked.middleRows(static_cast<Eigen::Index>(offsets[s]),
                                        static_cast<Eigen::Index>(offsets[s + 1] - offsets[s])));
  }
  return out;
}

// Cross-entropy of one logit row against a target, plus (optionally) the
// softmax written into probs.
template <class T>
double row_cross_entropy(const Eigen::Ref<const RowVector<T>>& row, Token target,
                         RowVector<T>* probs) {
  const T mx = row.maxCoeff();
  double sum = 0.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    sum += std::exp(static_cast<double>(row(j) - mx));
  }
  const double log_z = static_cast<double>(mx) + std::log(sum);
  if (probs != nullptr) {
    probs->resize(row.size());
    for (Eigen::Index j = 0; j < row.size(); ++j) {
      (*probs)(j) = static_cast<T>(std::exp(static_cast<double>(row(j)) - log_z));
    }
  }
  return log_z - static_cast<double>(row(target));
}

}  // namespace

template <class T>
std::vector<Matrix<T>> forward(const Model<T>& model,
                               const std::vector<TokenSequence>& batch) {
  ForwardCache<T> cache;
  run_forward(model, batch, cache);
  return split_rows(cache.logits, cache.offsets);
}

template <class T>
std::vector<std::vector<Matrix<T>>> attention_weights(const Model<T>& model,
                                                      const TokenSequence& sequence) {
  ForwardCache<T> cache;
  run_forward(model, {sequence}, cache);
  std::vector<std::vector<Matrix<T>>> out;
  for (auto& lc : cache.layers) out.push_back(std::move(lc.probs));
  return out;
}

template <class T>
double loss(const std::vector<Matrix<T>>& logits,
            const std::vector<TokenSequence>& targets) {
  if (logits.size() != targets.size()) {
    throw Error(ErrorCode::kShapeMismatch, "logits and targets batch sizes differ");
  }
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < logits.size(); ++s) {
    if (static_cast<std::size_t>(logits[s].rows()) != targets[s].size()) {
      throw Error(ErrorCode::kShapeMismatch, "logits and targets lengths differ");
    }
    for (std::size_t i = 0; i < targets[s].size(); ++i) {
      const Token t = targets[s][i];
      if (t == kIgnoreTarget) continue;
      if (t < 0 || t >= logits[s].cols()) {
        throw Error(ErrorCode::kShapeMismatch, "target id outside the logit width");
      }
      total += row_cross_entropy<T>(logits[s].row(static_cast<Eigen::Index>(i)), t, nullptr);
      ++counted;
    }
  }
  if (counted == 0) {
    throw Error(ErrorCode::kShapeMismatch, "every target position is masked");
  }
  return total / static_cast<double>(counted);
}

template <class T>
LossAndGradient<T> loss_and_gradient(const Model<T>& model,
                                     const std::vector<TokenSequence>& inputs,
                                     const std::vector<TokenSequence>& targets) {
  if (inputs.size() != targets.size()) {
    throw Error(ErrorCode::kShapeMismatch, "inputs and targets batch sizes differ");
  }
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    if (inputs[s].size() != targets[s].size()) {
      throw Error(ErrorCode::kShapeMismatch, "inputs and targets lengths differ");
    }
  }
  ForwardCache<T> cache;
  run_forward(model, inputs, cache);

  std::vector<Token> flat_targets;
  for (const auto& t : targets) flat_targets.insert(flat_targets.end(), t.begin(), t.end());
  std::size_t counted = 0;
  for (Token t : flat_targets) {
    if (t == kIgnoreTarget) continue;
    if (t < 0 || t >= model.config().vocab) {
      throw Error(ErrorCode::kShapeMismatch, "target id outside the vocabulary");
    }
    ++counted;
  }
  if (counted == 0) {
    throw Error(ErrorCode::kShapeMismatch, "every target position is masked");
  }

  LossAndGradient<T> out;
  out.counted = counted;
  const auto rows = cache.logits.rows();
  Matrix<T> dlogits = Matrix<T>::Zero(rows, cache.logits.cols());
  const T inv = T(1) / static_cast<T>(counted);
  RowVector<T> probs;
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Token t = flat_targets[static_cast<std::size_t>(r)];
    if (t == kIgnoreTarget) continue;
    total += row_cross_entropy<T>(cache.logits.row(r), t, &probs);
    probs(t) -= T(1);
    dlogits.row(r) = probs * inv;
  }
  out.loss = total / static_cast<double>(counted);
  out.gradient.assign(model.parameters().size(), T(0));
  run_backward(model, cache, dlogits, out.gradient);
  return out;
}

void next_token_pairs(const std::vector<TokenSequence>& sequences,
                      std::vector<TokenSequence>& inputs,
                      std::vector<TokenSequence>& targets) {
  inputs.clear();
  targets.clear();
  for (const auto& seq : sequences) {
    if (seq.size() < 2) continue;
    inputs.emplace_back(seq.begin(), seq.end() - 1);
    targets.emplace_back(seq.begin() + 1, seq.end());
  }
}

GradientCheckResult gradient_check(const Model<double>& model) {
  const ModelConfig& cfg = model.config();
  Rng rng(derive_seed(cfg.seed, 0x67726164ULL));
  std::vector<TokenSequence> sequences;
  for (int len : {9, 12}) {
    TokenSequence seq;
    for (int i = 0; i < len; ++i) {
      seq.push_back(static_cast<Token>(uniform_index(rng, static_cast<std::uint64_t>(cfg.vocab))));
    }
    sequences.push_back(std::move(seq));
  }
  std::vector<TokenSequence> inputs, targets;
  next_token_pairs(sequences, inputs, targets);

  const auto analytic = loss_and_gradient(model, inputs, targets).gradient;
  Model<double> probe = model;
  auto params = probe.parameters();
  constexpr double h = 1e-5;

  GradientCheckResult result;
  const auto layout = parameter_layout(cfg);
  for (const TensorInfo& t : layout) {
    for (std::size_t i = t.offset; i < t.offset + t.size(); ++i) {
      const double saved = params[i];
      params[i] = saved + h;
      const double up = loss(forward(probe, inputs), targets);
      params[i] = saved - h;
      const double down = loss(forward(probe, inputs), targets);
      params[i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), 1e-6});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      if (rel > result.max_relative_error) {
        result.max_relative_error = rel;
        result.worst_tensor = t.name;
      }
      ++result.parameters_checked;
    }
  }
  return result;
}

GradientCheckResult gradient_check(const ModelConfig& cfg) {
  return gradient_check(Model<double>(cfg));
}

template <class T>
Decoder<T>::Decoder(const Model<T>& model) : model_(&model) {
  const ModelConfig& cfg = model.config();
  keys_.assign(static_cast<std::size_t>(cfg.layers), Matrix<T>::Zero(cfg.context, cfg.dim));
  values_.assign(static_cast<std::size_t>(cfg.layers), Matrix<T>::Zero(cfg.context, cfg.dim));
}

template <class T>
const RowVector<T>& Decoder<T>::step(Token token) {
  const ModelConfig& cfg = model_->config();
  if (length_ >= cfg.context) {
    throw Error(ErrorCode::kContextFull, "decoder context is full");
  }
  if (token < 0 || token >= cfg.vocab) {
    throw Error(ErrorCode::kBadToken, "token id " + std::to_string(token) +
                                          " outside the vocabulary");
  }
  const Offsets& off = model_->offsets();
  const T* p = model_->parameters().data();
  const int d = cfg.dim;
  const int hd = d / cfg.heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  const int pos = length_;

  Matrix<T> x = CMap<T>(p + off.tok_emb, cfg.vocab, d).row(token) +
                CMap<T>(p + off.pos_emb, cfg.context, d).row(pos);
  Matrix<T> xhat, y;
  Column<T> rstd;
  for (int l = 0; l < cfg.layers; ++l) {
    const LayerOffsets& lo = off.layers[static_cast<std::size_t>(l)];
    Matrix<T>& keys = keys_[static_cast<std::size_t>(l)];
    Matrix<T>& values = values_[static_cast<std::size_t>(l)];
    layer_norm<T>(x, CVecMap<T>(p + lo.ln1_gain, d), CVecMap<T>(p + lo.ln1_bias, d), xhat, rstd, y);
    const Matrix<T> q = y * CMap<T>(p + lo.wq, d, d);
    keys.row(pos).noalias() = y * CMap<T>(p + lo.wk, d, d);
    values.row(pos).noalias() = y * CMap<T>(p + lo.wv, d, d);
    Matrix<T> att(1, d);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto col = static_cast<Eigen::Index>(h * hd);
      RowVector<T> scores =
          (q.block(0, col, 1, hd) * keys.block(0, col, pos + 1, hd).transpose()) * scale;
      const T mx = scores.maxCoeff();
      scores = (scores.array() - mx).exp();
      scores /= scores.sum();
      att.block(0, col, 1, hd).noalias() = scores * values.block(0, col, pos + 1, hd);
    }
    x.noalias() += att * CMap<T>(p + lo.wo, d, d);
    layer_norm<T>(x, CVecMap<T>(p + lo.ln2_gain, d), CVecMap<T>(p + lo.ln2_bias, d), xhat, rstd, y);
    Matrix<T> hidden = y * CMap<T>(p + lo.fc, d, 4 * d);
    hidden += CVecMap<T>(p + lo.fc_bias, 4 * d);
    hidden = hidden.unaryExpr([](T v) { return gelu(v); });
    x.noalias() += hidden * CMap<T>(p + lo.proj, 4 * d, d);
    x += CVecMap<T>(p + lo.proj_bias, d);
  }
  layer_norm<T>(x, CVecMap<T>(p + off.lnf_gain, d), CVecMap<T>(p + off.lnf_bias, d), xhat, rstd, y);
  logits_.noalias() = y * CMap<T>(p + off.head, d, cfg.vocab);
  ++length_;
  return logits_;
}

template class Model<float>;
template class Model<double>;
template class Decoder<float>;
template class Decoder<double>;
template std::vector<Matrix<float>> forward(const Model<float>&, const std::vector<TokenSequence>&);
template std::vector<Matrix<double>> forward(const Model<double>&, const std::vector<TokenSequence>&);
template std::vector<std::vector<Matrix<float>>> attention_weights(const Model<float>&,
                                                                   const TokenSequence&);
template std::vector<std::vector<Matrix<double>>> attention_weights(const Model<double>&,
                                                                    const TokenSequence&);
template double loss(const std::vector<Matrix<float>>&, const std::vector<TokenSequence>&);
template double loss(const std::vector<Matrix<double>>&, const std::vector<TokenSequence>&);
template LossAndGradient<float> loss_and_gradient(const Model<float>&, const std::vector<TokenSequence>&,
                                                  const std::vector<TokenSequence>&);
template LossAndGradient<double> loss_and_gradient(const Model<double>&, const std::vector<TokenSequence>&,
                                                   const std::vector<TokenSequence>&);

}  // namespace othello::lm
