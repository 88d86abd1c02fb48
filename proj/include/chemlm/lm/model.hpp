//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/lm/config.hpp"

namespace chemlm {

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kInitStd = 0.02;

template <class S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Standard normal from two uniforms (Box-Muller), independent of the
// standard library's distribution implementations.
inline double standard_normal(Rng &rng) {
  double u1 = uniform_unit(rng);
  double u2 = uniform_unit(rng);
  if (u1 < 1e-300)
    u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace internal {

template <class S>
struct LayerNormCache {
  RowMatrix<S> xhat;
  std::vector<S> rstd;
};

template <class S>
void layer_norm(const RowMatrix<S> &x, const S *g, const S *b, RowMatrix<S> &y,
                LayerNormCache<S> *cache) {
  const Eigen::Index n = x.rows(), d = x.cols();
  y.resize(n, d);
  if (cache) {
    cache->xhat.resize(n, d);
    cache->rstd.resize(n);
  }
  for (Eigen::Index r = 0; r < n; ++r) {
    const S *xr = x.row(r).data();
    S mean = 0;
    for (Eigen::Index k = 0; k < d; ++k)
      mean += xr[k];
    mean /= static_cast<S>(d);
    S var = 0;
    for (Eigen::Index k = 0; k < d; ++k)
      var += (xr[k] - mean) * (xr[k] - mean);
    var /= static_cast<S>(d);
    S rstd = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEps));
    S *yr = y.row(r).data();
    for (Eigen::Index k = 0; k < d; ++k) {
      S xh = (xr[k] - mean) * rstd;
      if (cache)
        cache->xhat(r, k) = xh;
      yr[k] = xh * g[k] + b[k];
    }
    if (cache)
      cache->rstd[r] = rstd;
  }
}

// Accumulates dx += LN'(dy); dg, db accumulate too.
template <class S>
void layer_norm_backward(const RowMatrix<S> &dy, const LayerNormCache<S> &cache, const S *g,
                         S *dg, S *db, RowMatrix<S> &dx) {
  const Eigen::Index n = dy.rows(), d = dy.cols();
  std::vector<S> dxhat(d);
  for (Eigen::Index r = 0; r < n; ++r) {
    const S *dyr = dy.row(r).data();
    const S *xh = cache.xhat.row(r).data();
    S mean_dxhat = 0, mean_dxhat_xhat = 0;
    for (Eigen::Index k = 0; k < d; ++k) {
      dg[k] += dyr[k] * xh[k];
      db[k] += dyr[k];
      dxhat[k] = dyr[k] * g[k];
      mean_dxhat += dxhat[k];
      mean_dxhat_xhat += dxhat[k] * xh[k];
    }
    mean_dxhat /= static_cast<S>(d);
    mean_dxhat_xhat /= static_cast<S>(d);
    S rstd = cache.rstd[r];
    S *dxr = dx.row(r).data();
    for (Eigen::Index k = 0; k < d; ++k)
      dxr[k] += rstd * (dxhat[k] - mean_dxhat - xh[k] * mean_dxhat_xhat);
  }
}

// Column sums accumulated row by row. Eigen's vectorized reductions pick
// their order from pointer alignment, which would break bit-reproducibility.
template <class S>
void add_column_sums(const RowMatrix<S> &m, S *out) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const S *row = m.row(r).data();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out[c] += row[c];
  }
}

template <class S>
S gelu(S x) {
  const S c = static_cast<S>(0.7978845608028654);  // sqrt(2/pi)
  return S(0.5) * x * (S(1) + std::tanh(c * (x + S(0.044715) * x * x * x)));
}

template <class S>
S gelu_grad(S x) {
  const S c = static_cast<S>(0.7978845608028654);
  S t = std::tanh(c * (x + S(0.044715) * x * x * x));
  return S(0.5) * (S(1) + t)
         + S(0.5) * x * (S(1) - t * t) * c * (S(1) + S(3) * S(0.044715) * x * x);
}

template <class S>
void softmax_row_inplace(S *row, int n) {
  S mx = row[0];
  for (int k = 1; k < n; ++k)
    mx = std::max(mx, row[k]);
  S sum = 0;
  for (int k = 0; k < n; ++k) {
    row[k] = std::exp(row[k] - mx);
    sum += row[k];
  }
  for (int k = 0; k < n; ++k)
    row[k] /= sum;
}

}  // namespace internal

template <class S>
struct BlockCache {
  RowMatrix<S> x_in;
  internal::LayerNormCache<S> ln1;
  RowMatrix<S> h1;
  RowMatrix<S> qkv;
  std::vector<S> probs;  // [batch][head][query][key]
  RowMatrix<S> att;
  RowMatrix<S> x_mid;
  internal::LayerNormCache<S> ln2;
  RowMatrix<S> h2;
  RowMatrix<S> pre_act;
  RowMatrix<S> act;
};

// Activations of one forward pass over a padded batch, rows ordered
// batch-major: row = b * T + t.
template <class S>
struct ForwardCache {
  int batch = 0;
  int length = 0;
  std::vector<int> inputs;
  std::vector<BlockCache<S>> blocks;
  RowMatrix<S> x_final;
  internal::LayerNormCache<S> lnf;
  RowMatrix<S> hf;
  RowMatrix<S> logits;
};

// Pre-norm GPT-style decoder over a flat parameter buffer.
template <class S>
class Transformer {
public:
  using Matrix = RowMatrix<S>;
  using MapMatrix = Eigen::Map<Matrix>;
  using ConstMapMatrix = Eigen::Map<const Matrix>;
  using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;
  using ConstMapRow = Eigen::Map<const RowVector>;

  explicit Transformer(const ModelConfig &config)
      : config_(config), layout_((config.validate(), config)), params_(layout_.total, S(0)) { }

  const ModelConfig &config() const { return config_; }
  const ModelLayout &layout() const { return layout_; }
  std::size_t num_parameters() const { return params_.size(); }
  std::vector<S> &params() { return params_; }
  const std::vector<S> &params() const { return params_; }

  // N(0, 0.02) weights and embeddings, unit gains, zero biases.
  void init(std::uint64_t seed) {
    Rng rng(seed);
    std::fill(params_.begin(), params_.end(), S(0));
    for (const TensorSpec &t: layout_.tensors) {
      bool gain = t.name.ends_with(".g");
      bool bias = t.name.ends_with(".b") || t.name.ends_with("b_qkv")
                  || t.name.ends_with("b_o") || t.name.ends_with("b_fc")
                  || t.name.ends_with("b_proj");
      for (std::size_t k = 0; k < t.size(); ++k) {
        S &p = params_[t.offset + k];
        if (gain)
          p = S(1);
        else if (!bias)
          p = static_cast<S>(kInitStd * standard_normal(rng));
      }
    }
  }

  ConstMapMatrix mat(std::size_t offset, int rows, int cols) const {
    return ConstMapMatrix(params_.data() + offset, rows, cols);
  }
  ConstMapRow vec(std::size_t offset, int n) const {
    return ConstMapRow(params_.data() + offset, n);
  }

  // Logits for a padded batch of input ids (batch x length, row-major).
  // Fills `cache` with what backward() needs.
  void forward(const std::vector<int> &inputs, int batch, int length,
               ForwardCache<S> &cache) const {
    const int d = config_.d_model, ff = config_.d_ff, v = config_.vocab_size;
    if (length > config_.context_len)
      throw Error(ErrorCode::kContextOverflow,
                  "sequence length " + std::to_string(length) + " exceeds context "
                      + std::to_string(config_.context_len));
    const int n = batch * length;
    cache.batch = batch;
    cache.length = length;
    cache.inputs = inputs;
    cache.blocks.resize(config_.n_layers);

    Matrix x(n, d);
    auto tok = mat(layout_.tok_emb, v, d);
    auto pos = mat(layout_.pos_emb, config_.context_len, d);
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < length; ++t) {
        int id = inputs[static_cast<std::size_t>(b) * length + t];
        x.row(b * length + t) = tok.row(id) + pos.row(t);
      }

    for (int l = 0; l < config_.n_layers; ++l) {
      const BlockLayout &bl = layout_.blocks[l];
      BlockCache<S> &bc = cache.blocks[l];
      bc.x_in = x;
      internal::layer_norm(x, params_.data() + bl.ln1_g, params_.data() + bl.ln1_b, bc.h1,
                           &bc.ln1);
      bc.qkv.noalias() = bc.h1 * mat(bl.w_qkv, d, 3 * d);
      bc.qkv.rowwise() += vec(bl.b_qkv, 3 * d);
      attention_forward(bc.qkv, batch, length, bc.probs, bc.att);
      x.noalias() += bc.att * mat(bl.w_o, d, d);
      x.rowwise() += vec(bl.b_o, d);
      bc.x_mid = x;
      internal::layer_norm(x, params_.data() + bl.ln2_g, params_.data() + bl.ln2_b, bc.h2,
                           &bc.ln2);
      bc.pre_act.noalias() = bc.h2 * mat(bl.w_fc, d, ff);
      bc.pre_act.rowwise() += vec(bl.b_fc, ff);
      bc.act = bc.pre_act.unaryExpr([](S z) { return internal::gelu(z); });
      x.noalias() += bc.act * mat(bl.w_proj, ff, d);
      x.rowwise() += vec(bl.b_proj, d);
    }
    cache.x_final = x;
    internal::layer_norm(x, params_.data() + layout_.lnf_g, params_.data() + layout_.lnf_b,
                         cache.hf, &cache.lnf);
    if (config_.tie_weights)
      cache.logits.noalias() = cache.hf * tok.transpose();
    else
      cache.logits.noalias() = cache.hf * mat(layout_.w_head, d, v);
  }

  // Accumulates parameter gradients into `grad` given dL/dlogits.
  void backward(const ForwardCache<S> &cache, const Matrix &dlogits, std::vector<S> &grad) const {
    const int d = config_.d_model, ff = config_.d_ff, v = config_.vocab_size;
    const int batch = cache.batch, length = cache.length;
    grad.resize(params_.size(), S(0));
    auto gmat = [&](std::size_t offset, int rows, int cols) {
      return MapMatrix(grad.data() + offset, rows, cols);
    };

    Matrix dhf;
    if (config_.tie_weights) {
      gmat(layout_.tok_emb, v, d).noalias() += dlogits.transpose() * cache.hf;
      dhf.noalias() = dlogits * mat(layout_.tok_emb, v, d);
    } else {
      gmat(layout_.w_head, d, v).noalias() += cache.hf.transpose() * dlogits;
      dhf.noalias() = dlogits * mat(layout_.w_head, d, v).transpose();
    }
    Matrix dx = Matrix::Zero(dhf.rows(), d);
    internal::layer_norm_backward(dhf, cache.lnf, params_.data() + layout_.lnf_g,
                                  grad.data() + layout_.lnf_g, grad.data() + layout_.lnf_b, dx);

    Matrix dact, dpre, dh, datt, dqkv;
    for (int l = config_.n_layers - 1; l >= 0; --l) {
      const BlockLayout &bl = layout_.blocks[l];
      const BlockCache<S> &bc = cache.blocks[l];

      gmat(bl.w_proj, ff, d).noalias() += bc.act.transpose() * dx;
      internal::add_column_sums(dx, grad.data() + bl.b_proj);
      dact.noalias() = dx * mat(bl.w_proj, ff, d).transpose();
      dpre = dact.cwiseProduct(
          bc.pre_act.unaryExpr([](S z) { return internal::gelu_grad(z); }));
      gmat(bl.w_fc, d, ff).noalias() += bc.h2.transpose() * dpre;
      internal::add_column_sums(dpre, grad.data() + bl.b_fc);
      dh.noalias() = dpre * mat(bl.w_fc, d, ff).transpose();
      internal::layer_norm_backward(dh, bc.ln2, params_.data() + bl.ln2_g,
                                    grad.data() + bl.ln2_g, grad.data() + bl.ln2_b, dx);

      gmat(bl.w_o, d, d).noalias() += bc.att.transpose() * dx;
      internal::add_column_sums(dx, grad.data() + bl.b_o);
      datt.noalias() = dx * mat(bl.w_o, d, d).transpose();
      attention_backward(bc.qkv, bc.probs, datt, batch, length, dqkv);
      gmat(bl.w_qkv, d, 3 * d).noalias() += bc.h1.transpose() * dqkv;
      internal::add_column_sums(dqkv, grad.data() + bl.b_qkv);
      dh.noalias() = dqkv * mat(bl.w_qkv, d, 3 * d).transpose();
      internal::layer_norm_backward(dh, bc.ln1, params_.data() + bl.ln1_g,
                                    grad.data() + bl.ln1_g, grad.data() + bl.ln1_b, dx);
    }

    auto dtok = gmat(layout_.tok_emb, v, d);
    auto dpos = gmat(layout_.pos_emb, config_.context_len, d);
    for (int b = 0; b < batch; ++b)
      for (int t = 0; t < length; ++t) {
        int r = b * length + t;
        dtok.row(cache.inputs[r]) += dx.row(r);
        dpos.row(t) += dx.row(r);
      }
  }

private:
  void attention_forward(const Matrix &qkv, int batch, int length, std::vector<S> &probs,
                         Matrix &att) const {
    const int d = config_.d_model, heads = config_.n_heads, hd = config_.head_dim();
    const S scale = S(1) / std::sqrt(static_cast<S>(hd));
    const std::size_t tt = static_cast<std::size_t>(length) * length;
    probs.assign(static_cast<std::size_t>(batch) * heads * tt, S(0));
    att.resize(static_cast<Eigen::Index>(batch) * length, d);
    Matrix scores(length, length);
    for (int b = 0; b < batch; ++b)
      for (int h = 0; h < heads; ++h) {
        auto q = qkv.block(b * length, h * hd, length, hd);
        auto k = qkv.block(b * length, d + h * hd, length, hd);
        auto vv = qkv.block(b * length, 2 * d + h * hd, length, hd);
        scores.noalias() = (q * k.transpose()) * scale;
        Eigen::Map<Matrix> p(probs.data() + (static_cast<std::size_t>(b) * heads + h) * tt,
                             length, length);
        for (int i = 0; i < length; ++i) {
          for (int j = 0; j <= i; ++j)
            p(i, j) = scores(i, j);
          internal::softmax_row_inplace(&p(i, 0), i + 1);
        }
        att.block(b * length, h * hd, length, hd).noalias() = p * vv;
      }
  }

  void attention_backward(const Matrix &qkv, const std::vector<S> &probs, const Matrix &datt,
                          int batch, int length, Matrix &dqkv) const {
    const int d = config_.d_model, heads = config_.n_heads, hd = config_.head_dim();
    const S scale = S(1) / std::sqrt(static_cast<S>(hd));
    const std::size_t tt = static_cast<std::size_t>(length) * length;
    dqkv.setZero(static_cast<Eigen::Index>(batch) * length, 3 * d);
    Matrix dp(length, length);
    for (int b = 0; b < batch; ++b)
      for (int h = 0; h < heads; ++h) {
        auto q = qkv.block(b * length, h * hd, length, hd);
        auto k = qkv.block(b * length, d + h * hd, length, hd);
        auto vv = qkv.block(b * length, 2 * d + h * hd, length, hd);
        auto da = datt.block(b * length, h * hd, length, hd);
        Eigen::Map<const Matrix> p(probs.data() + (static_cast<std::size_t>(b) * heads + h) * tt,
                                   length, length);
        dp.noalias() = da * vv.transpose();
        dqkv.block(b * length, 2 * d + h * hd, length, hd).noalias() = p.transpose() * da;
        for (int i = 0; i < length; ++i) {
          S dot = 0;
          for (int j = 0; j <= i; ++j)
            dot += p(i, j) * dp(i, j);
          for (int j = 0; j <= i; ++j)
            dp(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
          for (int j = i + 1; j < length; ++j)
            dp(i, j) = 0;
        }
        dqkv.block(b * length, h * hd, length, hd).noalias() = dp * k;
        dqkv.block(b * length, d + h * hd, length, hd).noalias() = dp.transpose() * q;
      }
  }

  ModelConfig config_;
  ModelLayout layout_;
  std::vector<S> params_;
};

}  // namespace chemlm
