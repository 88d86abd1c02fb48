//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/lm/checkpoint.hpp"
#include "chemlm/lm/optim.hpp"
#include "chemlm/lm/sampling.hpp"
#include "chemlm/lm/train.hpp"
#include "chemlm/pipeline/oracle.hpp"

namespace chemlm {

struct PretrainConfig {
  int epochs = 10;
  int batch_size = 64;
  double peak_lr = 1e-3;
  double final_fraction = 0.1;
  int warmup_steps = 0;
  int valid_ratio_sample = 1000;
  int sample_max_len = 0;  // 0 means the model's context length

  static PretrainConfig desk() { return {}; }
  static PretrainConfig paper() {
    PretrainConfig c;
    c.batch_size = 4096;
    return c;
  }

  void validate() const {
    if (epochs < 1 || batch_size < 1 || !(peak_lr > 0) || valid_ratio_sample < 1
        || !(final_fraction > 0) || warmup_steps < 0 || sample_max_len < 0)
      throw Error(ErrorCode::kConfig, "pretrain settings must be positive");
  }

  long steps_per_epoch(std::size_t corpus_size) const {
    return static_cast<long>((corpus_size + batch_size - 1) / batch_size);
  }

  LrSchedule schedule(std::size_t corpus_size) const {
    return LrSchedule::cosine(peak_lr, epochs * steps_per_epoch(corpus_size), final_fraction,
                              warmup_steps);
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double loss = 0;  // mean pre-update batch loss over the epoch
  double valid_ratio = 0;
  long steps = 0;  // optimizer steps taken so far
  double seconds = 0;
};

// Fraction of `count` samples that finish with <eos>, parse and pass valence.
template <class S>
double valid_ratio(const Transformer<S> &model, const Vocab &vocab, int count, std::uint64_t seed,
                   int max_len = 0, int chunk = 125) {
  if (max_len <= 0)
    max_len = model.config().context_len;
  Rng rng(seed);
  int valid = 0;
  for (int done = 0; done < count; done += chunk) {
    int n = std::min(chunk, count - done);
    for (const SampledSequence &s: sample(model, vocab, n, rng(), max_len))
      valid += is_valid_sample(s, vocab);
  }
  return count > 0 ? static_cast<double>(valid) / count : 0.0;
}

struct PretrainHooks {
  std::function<void(const EpochRecord &)> on_epoch;
  std::function<void(int epoch, long step, double loss)> on_step;
};

inline std::string epoch_checkpoint_name(int epoch) {
  std::ostringstream os;
  os << "epoch_" << std::setw(3) << std::setfill('0') << epoch << ".clm";
  return os.str();
}

// Run directory outputs; empty paths disable them.
struct PretrainOutputs {
  std::string checkpoint_dir;
  std::string metrics_csv;
  std::map<std::string, std::string> checkpoint_extra;
};

inline std::string format_epoch_row(const EpochRecord &r) {
  std::ostringstream os;
  os << std::setprecision(9) << r.epoch << ',' << r.loss << ',' << r.valid_ratio << ',' << r.steps
     << '\n';
  return os.str();
}

inline constexpr const char *kEpochCsvHeader = "epoch,loss,valid_ratio,steps\n";

// Trains epochs [start_epoch, cfg.epochs) of shuffled cross-entropy steps on
// the corpus sequences, each followed by <eos>.
// After each epoch the model is sampled for its valid ratio and a
// checkpoint with optimizer state is written. A non-finite loss aborts the
// epoch in progress; earlier checkpoints stay on disk.
template <class S>
std::vector<EpochRecord> pretrain(Transformer<S> &model, AdamState<S> &opt,
                                  const std::vector<TokenSequence> &corpus, const Vocab &vocab,
                                  const PretrainConfig &cfg, std::uint64_t seed,
                                  const PretrainOutputs &outputs = {},
                                  const PretrainHooks &hooks = {}, int start_epoch = 0) {
  cfg.validate();
  if (corpus.empty())
    throw Error(ErrorCode::kInvalidArgument, "empty pretraining corpus");
  const int max_len = cfg.sample_max_len > 0 ? cfg.sample_max_len : model.config().context_len;
  for (const TokenSequence &seq: corpus)
    if (static_cast<int>(seq.size()) + 1 > model.config().context_len)
      throw Error(ErrorCode::kContextOverflow, "corpus sequence longer than the context");
  if (!outputs.checkpoint_dir.empty())
    std::filesystem::create_directories(outputs.checkpoint_dir);

  std::vector<TokenSequence> targets;
  targets.reserve(corpus.size());
  for (const TokenSequence &seq: corpus)
    targets.push_back(with_eos(seq, vocab));

  std::vector<EpochRecord> records;
  std::vector<std::size_t> order(corpus.size());
  std::vector<TokenSequence> batch;
  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t { 0 });
    Rng shuffle_rng(derive_seed(seed, "pretrain/shuffle/" + std::to_string(epoch + 1)));
    shuffle_in_place(order, shuffle_rng);

    double loss_sum = 0;
    long nsteps = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k)
        batch.push_back(targets[order[k]]);
      double loss = ce_training_step(model, batch, vocab, opt);
      loss_sum += loss;
      ++nsteps;
      if (hooks.on_step)
        hooks.on_step(epoch + 1, opt.step, loss);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.loss = loss_sum / static_cast<double>(nsteps);
    rec.valid_ratio = valid_ratio(model, vocab, cfg.valid_ratio_sample,
                                  derive_seed(seed, "pretrain/valid/" + std::to_string(epoch + 1)),
                                  max_len);
    rec.steps = opt.step;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!outputs.checkpoint_dir.empty()) {
      std::map<std::string, std::string> extra = outputs.checkpoint_extra;
      extra["stage"] = "pretrain";
      extra["epoch"] = std::to_string(rec.epoch);
      extra["epochs"] = std::to_string(cfg.epochs);
      save_checkpoint((std::filesystem::path(outputs.checkpoint_dir)
                       / epoch_checkpoint_name(rec.epoch))
                          .string(),
                      model, &opt, extra);
    }
    if (!outputs.metrics_csv.empty()) {
      bool fresh = !std::filesystem::exists(outputs.metrics_csv) || rec.epoch == 1;
      std::ofstream csv(outputs.metrics_csv, fresh ? std::ios::binary | std::ios::trunc
                                                   : std::ios::binary | std::ios::app);
      if (!csv)
        throw Error(ErrorCode::kIo, "cannot write " + outputs.metrics_csv);
      if (fresh)
        csv << kEpochCsvHeader;
      csv << format_epoch_row(rec);
    }
    records.push_back(rec);
    if (hooks.on_epoch)
      hooks.on_epoch(rec);
  }
  return records;
}

}  // namespace chemlm
