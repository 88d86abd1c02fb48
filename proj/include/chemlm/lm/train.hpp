//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/lm/model.hpp"
#include "chemlm/lm/optim.hpp"
#include "chemlm/text/tokenizer.hpp"

namespace chemlm {

// Realized tokens of one sequence: the SMILES tokens, then <eos> unless the
// sequence was cut off. <bos> is implicit.
inline TokenSequence with_eos(TokenSequence tokens, const Vocab &vocab) {
  tokens.push_back(vocab.eos());
  return tokens;
}

// Teacher-forcing layout: inputs are <bos> + targets[:-1], padded with <pad>;
// padded target slots hold -1.
struct PaddedBatch {
  int batch = 0;
  int length = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
};

inline PaddedBatch make_padded_batch(const std::vector<TokenSequence> &targets,
                                     const Vocab &vocab) {
  PaddedBatch pb;
  pb.batch = static_cast<int>(targets.size());
  for (const TokenSequence &t: targets) {
    if (t.empty())
      throw Error(ErrorCode::kInvalidArgument, "empty target sequence");
    pb.length = std::max(pb.length, static_cast<int>(t.size()));
  }
  const std::size_t n = static_cast<std::size_t>(pb.batch) * pb.length;
  pb.inputs.assign(n, vocab.pad());
  pb.targets.assign(n, -1);
  for (int b = 0; b < pb.batch; ++b) {
    const TokenSequence &t = targets[b];
    std::size_t row = static_cast<std::size_t>(b) * pb.length;
    pb.inputs[row] = vocab.bos();
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (k + 1 < t.size())
        pb.inputs[row + k + 1] = t[k];
      pb.targets[row + k] = t[k];
    }
  }
  return pb;
}

// log p(target) per row, -inf-free; padded rows get 0.
template <class S>
std::vector<double> row_log_probs(const RowMatrix<S> &logits, const std::vector<int> &targets) {
  std::vector<double> out(targets.size(), 0.0);
  const Eigen::Index v = logits.cols();
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0)
      continue;
    const S *row = logits.row(static_cast<Eigen::Index>(r)).data();
    double mx = row[0];
    for (Eigen::Index k = 1; k < v; ++k)
      mx = std::max(mx, static_cast<double>(row[k]));
    double sum = 0;
    for (Eigen::Index k = 0; k < v; ++k)
      sum += std::exp(static_cast<double>(row[k]) - mx);
    out[r] = static_cast<double>(row[targets[r]]) - mx - std::log(sum);
  }
  return out;
}

// dL/dlogits for L = sum_r weight[r] * (-log p(target_r)).
template <class S>
RowMatrix<S> weighted_nll_grad(const RowMatrix<S> &logits, const std::vector<int> &targets,
                               const std::vector<double> &weight) {
  RowMatrix<S> d = RowMatrix<S>::Zero(logits.rows(), logits.cols());
  const int v = static_cast<int>(logits.cols());
  for (std::size_t r = 0; r < targets.size(); ++r) {
    if (targets[r] < 0 || weight[r] == 0.0)
      continue;
    S *dr = d.row(static_cast<Eigen::Index>(r)).data();
    for (int k = 0; k < v; ++k)
      dr[k] = logits(static_cast<Eigen::Index>(r), k);
    internal::softmax_row_inplace(dr, v);
    dr[targets[r]] -= S(1);
    const S w = static_cast<S>(weight[r]);
    for (int k = 0; k < v; ++k)
      dr[k] *= w;
  }
  return d;
}

// Sum of log p over each sequence's realized tokens.
template <class S>
std::vector<double> sequence_log_likelihoods(const Transformer<S> &model,
                                             const std::vector<TokenSequence> &targets,
                                             const Vocab &vocab, std::size_t chunk = 64) {
  std::vector<double> out;
  out.reserve(targets.size());
  ForwardCache<S> cache;
  for (std::size_t start = 0; start < targets.size(); start += chunk) {
    std::size_t stop = std::min(targets.size(), start + chunk);
    std::vector<TokenSequence> part(targets.begin() + start, targets.begin() + stop);
    PaddedBatch pb = make_padded_batch(part, vocab);
    model.forward(pb.inputs, pb.batch, pb.length, cache);
    std::vector<double> lp = row_log_probs(cache.logits, pb.targets);
    for (int b = 0; b < pb.batch; ++b) {
      double s = 0;
      for (int t = 0; t < pb.length; ++t)
        s += lp[static_cast<std::size_t>(b) * pb.length + t];
      out.push_back(s);
    }
  }
  return out;
}

template <class S>
double sequence_log_likelihood(const Transformer<S> &model, const TokenSequence &target,
                               const Vocab &vocab) {
  return sequence_log_likelihoods(model, { target }, vocab).front();
}

// Per-position next-token scores for <bos> + prefix.
template <class S>
RowMatrix<S> forward_logits(const Transformer<S> &model, const TokenSequence &prefix,
                            const Vocab &vocab) {
  std::vector<int> inputs { vocab.bos() };
  inputs.insert(inputs.end(), prefix.begin(), prefix.end());
  ForwardCache<S> cache;
  model.forward(inputs, 1, static_cast<int>(inputs.size()), cache);
  return cache.logits;
}

// Mean next-token cross-entropy over non-pad positions and its gradient.
template <class S>
double ce_loss_and_grad(const Transformer<S> &model, const std::vector<TokenSequence> &targets,
                        const Vocab &vocab, std::vector<S> &grad) {
  PaddedBatch pb = make_padded_batch(targets, vocab);
  ForwardCache<S> cache;
  model.forward(pb.inputs, pb.batch, pb.length, cache);
  std::vector<double> lp = row_log_probs(cache.logits, pb.targets);
  double count = 0, total = 0;
  for (std::size_t r = 0; r < lp.size(); ++r)
    if (pb.targets[r] >= 0) {
      total -= lp[r];
      count += 1;
    }
  double loss = total / count;
  if (!std::isfinite(loss))
    throw Error(ErrorCode::kNonFiniteLoss, "cross-entropy is not finite");
  std::vector<double> weight(lp.size(), 1.0 / count);
  grad.assign(model.num_parameters(), S(0));
  model.backward(cache, weighted_nll_grad(cache.logits, pb.targets, weight), grad);
  return loss;
}

// Returns the loss before the update.
template <class S>
double ce_training_step(Transformer<S> &model, const std::vector<TokenSequence> &targets,
                        const Vocab &vocab, AdamState<S> &opt) {
  if (targets.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty training batch");
  std::vector<S> grad;
  double loss = ce_loss_and_grad(model, targets, vocab, grad);
  opt.update(model.params(), grad);
  return loss;
}

// Per-sequence objective on the agent's log-likelihoods: the mean loss and
// dL/dlogp for each sequence. Everything else is a constant.
struct SequenceObjective {
  double loss = 0;
  std::vector<double> dloss_dlogp;
};

using SequenceObjectiveFn = std::function<SequenceObjective(const std::vector<double> &logp)>;

template <class S>
double sequence_objective_and_grad(const Transformer<S> &model,
                                   const std::vector<TokenSequence> &targets, const Vocab &vocab,
                                   const SequenceObjectiveFn &objective, std::vector<S> &grad,
                                   std::vector<double> *logp_out = nullptr) {
  PaddedBatch pb = make_padded_batch(targets, vocab);
  ForwardCache<S> cache;
  model.forward(pb.inputs, pb.batch, pb.length, cache);
  std::vector<double> lp = row_log_probs(cache.logits, pb.targets);
  std::vector<double> logp(pb.batch, 0.0);
  for (int b = 0; b < pb.batch; ++b)
    for (int t = 0; t < pb.length; ++t)
      logp[b] += lp[static_cast<std::size_t>(b) * pb.length + t];
  SequenceObjective obj = objective(logp);
  if (!std::isfinite(obj.loss))
    throw Error(ErrorCode::kNonFiniteLoss, "sequence objective is not finite");
  if (obj.dloss_dlogp.size() != logp.size())
    throw Error(ErrorCode::kShapeMismatch, "objective gradient has wrong length");
  // d(-log p)/dlogits is what weighted_nll_grad builds, hence the sign.
  std::vector<double> weight(lp.size(), 0.0);
  for (int b = 0; b < pb.batch; ++b)
    for (int t = 0; t < pb.length; ++t)
      weight[static_cast<std::size_t>(b) * pb.length + t] = -obj.dloss_dlogp[b];
  grad.assign(model.num_parameters(), S(0));
  model.backward(cache, weighted_nll_grad(cache.logits, pb.targets, weight), grad);
  if (logp_out)
    *logp_out = std::move(logp);
  return obj.loss;
}

// One optimizer update driven by a per-sequence objective.
template <class S>
double rl_weighted_step(Transformer<S> &model, const std::vector<TokenSequence> &targets,
                        const Vocab &vocab, const SequenceObjectiveFn &objective,
                        AdamState<S> &opt) {
  if (targets.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty RL batch");
  std::vector<S> grad;
  double loss = sequence_objective_and_grad(model, targets, vocab, objective, grad);
  opt.update(model.params(), grad);
  return loss;
}

}  // namespace chemlm
