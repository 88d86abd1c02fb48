//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/lm/model.hpp"
#include "chemlm/text/tokenizer.hpp"

namespace chemlm {

struct SampledSequence {
  TokenSequence tokens;  // without the leading <bos> and final <eos>
  bool truncated = false;

  // What the model actually emitted, for likelihood evaluation.
  TokenSequence realized(const Vocab &vocab) const {
    TokenSequence out = tokens;
    if (!truncated)
      out.push_back(vocab.eos());
    return out;
  }
};

// Draws `count` sequences in parallel with a key/value cache. At most
// `max_len` tokens are emitted per sequence, <eos> included; a sequence
// without <eos> by then is truncated. temperature <= 0 decodes greedily.
// Emitting <bos> or <pad> ends a sequence as truncated; the token is kept so
// likelihoods still describe what was drawn.
template <class S>
std::vector<SampledSequence> sample(const Transformer<S> &model, const Vocab &vocab, int count,
                                    std::uint64_t seed, int max_len, double temperature = 1.0) {
  const ModelConfig &cfg = model.config();
  if (max_len < 1 || max_len > cfg.context_len)
    throw Error(ErrorCode::kContextOverflow, "max_len must be in [1, context_len]");
  const ModelLayout &lay = model.layout();
  const int d = cfg.d_model, ff = cfg.d_ff, v = cfg.vocab_size, heads = cfg.n_heads;
  const int hd = cfg.head_dim();
  const S scale = S(1) / std::sqrt(static_cast<S>(hd));
  using Matrix = RowMatrix<S>;

  Rng rng(seed);
  std::vector<SampledSequence> out(count);
  std::vector<bool> done(count, false), stopped(count, false);
  std::vector<int> current(count, vocab.bos());
  std::vector<Matrix> keys(cfg.n_layers, Matrix(static_cast<Eigen::Index>(count) * max_len, d));
  std::vector<Matrix> values(cfg.n_layers, Matrix(static_cast<Eigen::Index>(count) * max_len, d));

  auto tok = model.mat(lay.tok_emb, v, d);
  auto pos = model.mat(lay.pos_emb, cfg.context_len, d);
  Matrix x(count, d), h, qkv, att(count, d), pre, logits;
  std::vector<S> scores(max_len);
  std::vector<double> probs(v);
  int remaining = count;

  for (int t = 0; t < max_len && remaining > 0; ++t) {
    for (int b = 0; b < count; ++b)
      x.row(b) = tok.row(current[b]) + pos.row(t);
    for (int l = 0; l < cfg.n_layers; ++l) {
      const BlockLayout &bl = lay.blocks[l];
      internal::layer_norm<S>(x, model.params().data() + bl.ln1_g,
                              model.params().data() + bl.ln1_b, h, nullptr);
      qkv.noalias() = h * model.mat(bl.w_qkv, d, 3 * d);
      qkv.rowwise() += model.vec(bl.b_qkv, 3 * d);
      for (int b = 0; b < count; ++b) {
        keys[l].row(b * max_len + t) = qkv.row(b).segment(d, d);
        values[l].row(b * max_len + t) = qkv.row(b).segment(2 * d, d);
      }
      for (int b = 0; b < count; ++b)
        for (int hh = 0; hh < heads; ++hh) {
          auto q = qkv.row(b).segment(hh * hd, hd);
          for (int j = 0; j <= t; ++j)
            scores[j] = q.dot(keys[l].row(b * max_len + j).segment(hh * hd, hd)) * scale;
          internal::softmax_row_inplace(scores.data(), t + 1);
          auto a = att.row(b).segment(hh * hd, hd);
          a.setZero();
          for (int j = 0; j <= t; ++j)
            a += scores[j] * values[l].row(b * max_len + j).segment(hh * hd, hd);
        }
      x.noalias() += att * model.mat(bl.w_o, d, d);
      x.rowwise() += model.vec(bl.b_o, d);
      internal::layer_norm<S>(x, model.params().data() + bl.ln2_g,
                              model.params().data() + bl.ln2_b, h, nullptr);
      pre.noalias() = h * model.mat(bl.w_fc, d, ff);
      pre.rowwise() += model.vec(bl.b_fc, ff);
      pre = pre.unaryExpr([](S z) { return internal::gelu(z); });
      x.noalias() += pre * model.mat(bl.w_proj, ff, d);
      x.rowwise() += model.vec(bl.b_proj, d);
    }
    internal::layer_norm<S>(x, model.params().data() + lay.lnf_g,
                            model.params().data() + lay.lnf_b, h, nullptr);
    if (cfg.tie_weights)
      logits.noalias() = h * tok.transpose();
    else
      logits.noalias() = h * model.mat(lay.w_head, d, v);

    for (int b = 0; b < count; ++b) {
      if (done[b] || stopped[b])
        continue;
      int choice = 0;
      if (temperature <= 0) {
        for (int k = 1; k < v; ++k)
          if (logits(b, k) > logits(b, choice))
            choice = k;
      } else {
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < v; ++k)
          mx = std::max(mx, static_cast<double>(logits(b, k)) / temperature);
        double sum = 0;
        for (int k = 0; k < v; ++k) {
          probs[k] = std::exp(static_cast<double>(logits(b, k)) / temperature - mx);
          sum += probs[k];
        }
        double u = uniform_unit(rng) * sum, acc = 0;
        for (choice = 0; choice < v - 1; ++choice) {
          acc += probs[choice];
          if (u < acc)
            break;
        }
      }
      current[b] = choice;
      if (choice == vocab.eos()) {
        done[b] = true;
        --remaining;
      } else {
        out[b].tokens.push_back(choice);
        if (choice == vocab.bos() || choice == vocab.pad()) {
          stopped[b] = true;
          --remaining;
        }
      }
    }
  }
  for (int b = 0; b < count; ++b)
    out[b].truncated = !done[b];
  return out;
}

}  // namespace chemlm
