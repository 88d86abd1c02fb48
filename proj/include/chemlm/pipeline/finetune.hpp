//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/lm/optim.hpp"
#include "chemlm/lm/sampling.hpp"
#include "chemlm/lm/train.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/pipeline/memory.hpp"
#include "chemlm/pipeline/oracle.hpp"

namespace chemlm {

struct FinetuneConfig {
  int steps = 300;
  int batch = 64;
  double lr = 1e-4;
  double sigma = 1000;
  int max_sample_len = 128;
  int memory_capacity = 1000;
  double temperature = 1.0;

  static FinetuneConfig desk() { return {}; }
  static FinetuneConfig paper() {
    FinetuneConfig c;
    c.steps = 1000;
    c.batch = 256;
    return c;
  }

  void validate() const {
    if (steps < 0 || batch < 1 || !(lr > 0) || !(sigma > 0) || max_sample_len < 1
        || memory_capacity < 1 || !(temperature > 0))
      throw Error(ErrorCode::kConfig, "finetune settings must be positive");
  }
};

// One scored batch as drawn by the agent.
struct StepBatch {
  int step = 0;  // 1-based
  std::vector<SampledSequence> samples;
  std::vector<std::string> smiles;  // detokenized, one per sample
  std::vector<double> scores;  // -1 for invalid or truncated
};

struct StepRecord {
  int step = 0;
  double mean_score = 0;  // invalid samples count as -1
  double valid_mean_score = 0;  // NaN when no sample is valid
  double top1 = kInvalidScore;  // best score seen so far
  double valid_frac = 0;
  double mean_len = 0;  // tokens per sample, <eos> excluded
  double loss = 0;
  std::vector<std::pair<std::string, double>> extra;
};

struct FinetuneHooks {
  // May append columns to the record before it is emitted.
  std::function<void(const StepBatch &, StepRecord &)> augment;
  std::function<void(const StepRecord &, const Memory &)> on_step;
};

template <class S>
struct FinetuneResult {
  Transformer<S> agent;
  Memory memory;
  std::vector<StepRecord> records;
};

// Scores every sample; valid ones also yield their canonical form.
inline std::vector<double> score_samples(const std::vector<SampledSequence> &samples,
                                         const Vocab &vocab, const MolScoreFn &score_fn,
                                         std::vector<std::string> &smiles,
                                         std::vector<std::string> &canonical) {
  std::vector<double> scores(samples.size(), kInvalidScore);
  smiles.assign(samples.size(), {});
  canonical.assign(samples.size(), {});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    smiles[i] = detokenize(samples[i].tokens, vocab);
    if (samples[i].truncated)
      continue;
    auto mol = parse_valid(smiles[i]);
    if (!mol)
      continue;
    double s = score_fn(*mol);
    if (!std::isfinite(s))
      continue;
    scores[i] = s;
    canonical[i] = canonical_smiles(*mol);
  }
  return scores;
}

// Sample, score, remember, and one update of the agent against the frozen
// prior per step. Likelihoods exclude <bos> and include <eos> when drawn.
template <class S>
FinetuneResult<S> rl_finetune(const Transformer<S> &prior, const Vocab &vocab,
                              const MolScoreFn &score_fn, const FinetuneConfig &cfg,
                              std::uint64_t seed, const FinetuneHooks &hooks = {}) {
  cfg.validate();
  if (cfg.max_sample_len > prior.config().context_len)
    throw Error(ErrorCode::kContextOverflow, "max_sample_len exceeds the context length");
  FinetuneResult<S> res { prior, Memory(static_cast<std::size_t>(cfg.memory_capacity)), {} };
  Transformer<S> &agent = res.agent;
  AdamState<S> opt(agent.num_parameters(), LrSchedule::constant(cfg.lr));
  double top1 = kInvalidScore;
  std::vector<std::string> canonical;

  for (int step = 1; step <= cfg.steps; ++step) {
    StepBatch sb;
    sb.step = step;
    sb.samples = sample(agent, vocab, cfg.batch,
                        derive_seed(seed, "finetune/sample/" + std::to_string(step)),
                        cfg.max_sample_len, cfg.temperature);
    sb.scores = score_samples(sb.samples, vocab, score_fn, sb.smiles, canonical);

    StepRecord rec;
    rec.step = step;
    int nvalid = 0;
    double sum = 0, valid_sum = 0, len_sum = 0;
    for (std::size_t i = 0; i < sb.samples.size(); ++i) {
      sum += sb.scores[i];
      len_sum += static_cast<double>(sb.samples[i].tokens.size());
      if (!canonical[i].empty()) {
        ++nvalid;
        valid_sum += sb.scores[i];
        res.memory.insert_canonical(canonical[i], sb.smiles[i], sb.scores[i], step);
      }
      top1 = std::max(top1, sb.scores[i]);
    }
    const double m = static_cast<double>(cfg.batch);
    rec.mean_score = sum / m;
    rec.valid_mean_score = nvalid ? valid_sum / nvalid : std::numeric_limits<double>::quiet_NaN();
    rec.valid_frac = nvalid / m;
    rec.mean_len = len_sum / m;
    rec.top1 = top1;

    std::vector<TokenSequence> realized;
    realized.reserve(sb.samples.size());
    for (const SampledSequence &s: sb.samples)
      realized.push_back(s.realized(vocab));
    std::vector<double> prior_logp = sequence_log_likelihoods(prior, realized, vocab);
    const double sigma = cfg.sigma;
    const std::vector<double> &scores = sb.scores;
    SequenceObjectiveFn objective = [&](const std::vector<double> &agent_logp) {
      SequenceObjective obj;
      obj.dloss_dlogp.resize(agent_logp.size());
      for (std::size_t i = 0; i < agent_logp.size(); ++i) {
        double r = prior_logp[i] - agent_logp[i] + sigma * scores[i];
        obj.loss += r * r / m;
        obj.dloss_dlogp[i] = -2.0 * r / m;
      }
      return obj;
    };
    rec.loss = rl_weighted_step(agent, realized, vocab, objective, opt);

    if (hooks.augment)
      hooks.augment(sb, rec);
    if (hooks.on_step)
      hooks.on_step(rec, res.memory);
    res.records.push_back(std::move(rec));
  }
  return res;
}

// Per-step CSV, one row flushed per step.
class StepCsvWriter {
public:
  explicit StepCsvWriter(const std::string &path): path_(path), out_(path, std::ios::binary) {
    if (!out_)
      throw Error(ErrorCode::kIo, "cannot write " + path);
  }

  void write(const StepRecord &r) {
    if (!header_written_) {
      out_ << "step,mean_score,valid_mean_score,top1,valid_frac,mean_len,loss";
      for (const auto &[name, value]: r.extra)
        out_ << ',' << name;
      out_ << '\n';
      header_written_ = true;
    }
    out_ << std::setprecision(9) << r.step << ',' << r.mean_score << ',' << r.valid_mean_score
         << ',' << r.top1 << ',' << r.valid_frac << ',' << r.mean_len << ',' << r.loss;
    for (const auto &[name, value]: r.extra)
      out_ << ',' << value;
    out_ << '\n';
    out_.flush();
    if (!out_)
      throw Error(ErrorCode::kIo, "failed writing " + path_);
  }

private:
  std::string path_;
  std::ofstream out_;
  bool header_written_ = false;
};

}  // namespace chemlm
