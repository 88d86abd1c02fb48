//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chemlm/core/error.hpp"

namespace chemlm {

struct ModelConfig {
  int n_layers = 4;
  int d_model = 128;
  int n_heads = 4;
  int d_ff = 512;
  int context_len = 128;
  int vocab_size = 0;
  bool tie_weights = false;

  int head_dim() const { return d_model / n_heads; }

  void validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1 || d_ff < 1 || context_len < 2
        || vocab_size < 1)
      throw Error(ErrorCode::kInvalidArgument, "model dimensions must be positive");
    if (d_model % n_heads != 0)
      throw Error(ErrorCode::kInvalidArgument, "d_model must be divisible by n_heads");
  }

  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

// Desk preset: 4 blocks, width 128, 4 heads, context 128.
inline ModelConfig desk_model_config(int vocab_size) {
  return { 4, 128, 4, 512, 128, vocab_size, false };
}

// Eight blocks at width 256, about 6.4M parameters.
inline ModelConfig paper_model_config(int vocab_size) {
  return { 8, 256, 8, 1024, 128, vocab_size, false };
}

// One named dense array inside the flat parameter buffer, row-major.
struct TensorSpec {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

struct BlockLayout {
  std::size_t ln1_g, ln1_b;
  std::size_t w_qkv, b_qkv;
  std::size_t w_o, b_o;
  std::size_t ln2_g, ln2_b;
  std::size_t w_fc, b_fc;
  std::size_t w_proj, b_proj;
};

struct ModelLayout {
  std::size_t tok_emb = 0;
  std::size_t pos_emb = 0;
  std::vector<BlockLayout> blocks;
  std::size_t lnf_g = 0, lnf_b = 0;
  std::size_t w_head = 0;  // equals tok_emb when weights are tied
  std::vector<TensorSpec> tensors;
  std::size_t total = 0;

  explicit ModelLayout(const ModelConfig &c) {
    const int d = c.d_model;
    auto add = [&](const std::string &name, int rows, int cols) {
      TensorSpec t { name, total, rows, cols };
      total += t.size();
      tensors.push_back(t);
      return t.offset;
    };
    tok_emb = add("tok_emb", c.vocab_size, d);
    pos_emb = add("pos_emb", c.context_len, d);
    for (int l = 0; l < c.n_layers; ++l) {
      std::string p = "h." + std::to_string(l) + ".";
      BlockLayout b {};
      b.ln1_g = add(p + "ln1.g", 1, d);
      b.ln1_b = add(p + "ln1.b", 1, d);
      b.w_qkv = add(p + "attn.w_qkv", d, 3 * d);
      b.b_qkv = add(p + "attn.b_qkv", 1, 3 * d);
      b.w_o = add(p + "attn.w_o", d, d);
      b.b_o = add(p + "attn.b_o", 1, d);
      b.ln2_g = add(p + "ln2.g", 1, d);
      b.ln2_b = add(p + "ln2.b", 1, d);
      b.w_fc = add(p + "mlp.w_fc", d, c.d_ff);
      b.b_fc = add(p + "mlp.b_fc", 1, c.d_ff);
      b.w_proj = add(p + "mlp.w_proj", c.d_ff, d);
      b.b_proj = add(p + "mlp.b_proj", 1, d);
      blocks.push_back(b);
    }
    lnf_g = add("ln_f.g", 1, d);
    lnf_b = add("ln_f.b", 1, d);
    w_head = c.tie_weights ? tok_emb : add("head.w", d, c.vocab_size);
  }
};

inline std::size_t parameter_count(const ModelConfig &c) {
  const std::size_t d = c.d_model, ff = c.d_ff, v = c.vocab_size, t = c.context_len;
  std::size_t block = 2 * d + d * 3 * d + 3 * d + d * d + d + 2 * d + d * ff + ff + ff * d + d;
  return v * d + t * d + c.n_layers * block + 2 * d + (c.tie_weights ? 0 : d * v);
}

}  // namespace chemlm
