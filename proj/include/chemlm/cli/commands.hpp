//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chemlm/analysis/fragments.hpp"
#include "chemlm/analysis/report.hpp"
#include "chemlm/cli/config.hpp"
#include "chemlm/cli/run_dir.hpp"
#include "chemlm/core/error.hpp"
#include "chemlm/lm/checkpoint.hpp"
#include "chemlm/lm/sampling.hpp"
#include "chemlm/pipeline/corpus.hpp"
#include "chemlm/pipeline/finetune.hpp"
#include "chemlm/pipeline/memory.hpp"
#include "chemlm/pipeline/oracle.hpp"
#include "chemlm/pipeline/pretrain.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "chemlm/text/spe.hpp"

namespace chemlm {

namespace fs = std::filesystem;

// Run directory file names.
inline constexpr const char *kConfigSnapshot = "config.txt";
inline constexpr const char *kVocabFile = "vocab.txt";
inline constexpr const char *kPretrainMetrics = "pretrain_metrics.csv";
inline constexpr const char *kFilterReport = "filter_report.txt";
inline constexpr const char *kModelFile = "model.clm";
inline constexpr const char *kAgentFile = "agent.clm";
inline constexpr const char *kStepMetrics = "metrics.csv";
inline constexpr const char *kMemoryFile = "memory.csv";
inline constexpr const char *kSummaryFile = "summary.txt";

// Defaults rooted at the bundled data directory.
inline RunConfig default_run_config(const std::string &data_dir) {
  RunConfig rc;
  rc.data.corpus = (fs::path(data_dir) / "pretrain_20k.smi").string();
  rc.data.vocab = (fs::path(data_dir) / "vocab.txt").string();
  return rc;
}

inline std::string vocab_signature(const Vocab &vocab) {
  std::string joined;
  for (const std::string &t: vocab.tokens())
    joined += t + '\n';
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(joined);
  return os.str();
}

// Loads a checkpoint and checks it was trained with `vocab`.
inline Checkpoint<float> load_model_for(const std::string &path, const Vocab &vocab) {
  Checkpoint<float> ck = load_checkpoint<float>(path);
  if (ck.header.config.vocab_size != vocab.size())
    throw Error(ErrorCode::kShapeMismatch, path + ": vocab_size " +
                                               std::to_string(ck.header.config.vocab_size)
                                               + " does not match the vocabulary ("
                                               + std::to_string(vocab.size()) + ")");
  auto it = ck.header.extra.find("vocab");
  if (it != ck.header.extra.end() && it->second != vocab_signature(vocab))
    throw Error(ErrorCode::kShapeMismatch, path + ": trained with a different vocabulary");
  return ck;
}

inline void write_snapshot(const RunConfig &rc, const std::string &run_dir) {
  write_text_file(fs::path(run_dir) / kConfigSnapshot, format_run_config(rc));
}

inline std::set<std::string> target_exclusions() {
  std::set<std::string> out;
  for (const DrugTarget &t: kDrugTargets)
    out.insert(canonical_smiles(*parse_smiles(t.canonical)));
  return out;
}

// Latest epoch_NNN.clm in `dir`, or 0 when there is none.
inline int latest_epoch_checkpoint(const std::string &dir) {
  int best = 0;
  std::error_code ec;
  if (!fs::is_directory(dir, ec))
    return 0;
  static const std::regex pattern("epoch_([0-9]+)\\.clm");
  for (const auto &entry: fs::directory_iterator(dir)) {
    std::smatch m;
    std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern))
      best = std::max(best, std::stoi(m[1].str()));
  }
  return best;
}

// Keeps the header and rows whose first field is <= last_epoch.
inline void truncate_epoch_csv(const std::string &path, int last_epoch) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    return;
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header || std::atoi(line.c_str()) <= last_epoch)
      kept += line + '\n';
    header = false;
  }
  in.close();
  write_text_file(path, kept);
}

struct PretrainOutcome {
  FilteredCorpus corpus;
  std::vector<EpochRecord> records;
  int start_epoch = 0;
};

inline PretrainOutcome cmd_pretrain(const RunConfig &rc, bool resume, std::ostream &log) {
  validate_run_config(rc);
  Vocab vocab = Vocab::load(rc.data.vocab);
  std::vector<std::string> raw = read_smiles_file(rc.data.corpus);
  PretrainOutcome out;
  out.corpus = filter_corpus(raw, rc.data.max_tokens, vocab,
                             rc.data.exclude_targets ? target_exclusions()
                                                     : std::set<std::string> {});
  const RejectTally &rt = out.corpus.rejected;
  std::ostringstream report;
  report << "read=" << raw.size() << "\nkept=" << out.corpus.smiles.size()
         << "\nparse_failure=" << rt.parse_failure << "\nmulti_fragment=" << rt.multi_fragment
         << "\noverlong=" << rt.overlong << "\nrare_token=" << rt.rare_token
         << "\nexcluded_target=" << rt.excluded << '\n';
  log << "corpus: " << raw.size() << " read, " << out.corpus.smiles.size() << " kept\n";
  if (out.corpus.tokens.empty())
    throw Error(ErrorCode::kInvalidArgument, "no molecules left after filtering " + rc.data.corpus);

  RunDirLock lock(rc.out_dir);
  fs::path dir(rc.out_dir);
  std::string ck_dir = (dir / "checkpoints").string();
  ModelConfig mc = rc.model.to_config(vocab.size());
  Transformer<float> model(mc);
  AdamState<float> opt;
  if (resume && latest_epoch_checkpoint(ck_dir) > 0) {
    int last = latest_epoch_checkpoint(ck_dir);
    Checkpoint<float> ck =
        load_model_for((fs::path(ck_dir) / epoch_checkpoint_name(last)).string(), vocab);
    if (!(ck.header.config == mc))
      throw Error(ErrorCode::kConfig, "resume: model settings differ from the checkpoint");
    if (!ck.optimizer)
      throw Error(ErrorCode::kFormatVersionMismatch, "resume: checkpoint lacks optimizer state");
    model = std::move(ck.model);
    opt = std::move(*ck.optimizer);
    out.start_epoch = last;
    truncate_epoch_csv((dir / kPretrainMetrics).string(), last);
    log << "resuming after epoch " << last << '\n';
  } else {
    model.init(stage_seed(rc, "init"));
    opt = AdamState<float>(model.num_parameters(), rc.pretrain.schedule(out.corpus.tokens.size()));
  }
  write_snapshot(rc, rc.out_dir);
  write_text_file(dir / kFilterReport, report.str());
  vocab.save((dir / kVocabFile).string());

  PretrainOutputs outputs { ck_dir, (dir / kPretrainMetrics).string(),
                            { { "vocab", vocab_signature(vocab) } } };
  PretrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord &r) {
    log << "epoch " << r.epoch << "/" << rc.pretrain.epochs << " loss " << r.loss
        << " valid_ratio " << r.valid_ratio << " (" << std::fixed << std::setprecision(1)
        << r.seconds << " s)" << std::defaultfloat << std::setprecision(6) << std::endl;
  };
  out.records = pretrain(model, opt, out.corpus.tokens, vocab, rc.pretrain,
                         stage_seed(rc, "pretrain"), outputs, hooks, out.start_epoch);
  save_checkpoint((dir / kModelFile).string(), model, &opt,
                  { { "stage", "pretrain" }, { "vocab", vocab_signature(vocab) } });
  return out;
}

// Probe set for a task: the three drug targets, plus the custom target.
inline std::vector<LabeledSmiles> task_probes(const std::string &task) {
  std::vector<LabeledSmiles> probes = target_probes();
  if (!find_drug_target(task))
    probes.push_back({ "custom_target", task });
  return probes;
}

struct FinetuneOutcome {
  Memory memory;
  std::vector<StepRecord> records;
};

inline FinetuneOutcome cmd_finetune(const RunConfig &rc, std::ostream &log) {
  validate_run_config(rc);
  std::optional<RediscoveryOracle> oracle;
  try {
    oracle.emplace(make_task_oracle(rc.finetune.task));
  } catch (const Error &e) {
    throw Error(ErrorCode::kConfig, std::string("finetune.task: ") + e.what());
  }
  if (rc.finetune.prior.empty())
    throw Error(ErrorCode::kConfig, "finetune.prior is not set");
  Vocab vocab = Vocab::load(rc.data.vocab);
  Checkpoint<float> prior = load_model_for(rc.finetune.prior, vocab);

  RunDirLock lock(rc.out_dir);
  fs::path dir(rc.out_dir);
  write_snapshot(rc, rc.out_dir);
  vocab.save((dir / kVocabFile).string());
  StepCsvWriter csv((dir / kStepMetrics).string());
  std::string memory_path = (dir / kMemoryFile).string();

  FinetuneHooks hooks;
  hooks.on_step = [&](const StepRecord &r, const Memory &mem) {
    csv.write(r);
    mem.save_csv(memory_path);
    if (r.step == 1 || r.step % 10 == 0 || r.step == rc.finetune.cfg.steps)
      log << "step " << r.step << " mean " << r.mean_score << " top1 " << r.top1 << " valid "
          << r.valid_frac << " loss " << r.loss << std::endl;
  };
  if (rc.finetune.track_fragments)
    hooks = fragment_tracking_hooks(task_probes(rc.finetune.task),
                                    { rc.spe.min_freq, rc.spe.augment, stage_seed(rc, "spe") },
                                    hooks);
  FinetuneResult<float> res = rl_finetune(prior.model, vocab, oracle->as_function(),
                                          rc.finetune.cfg, stage_seed(rc, "finetune"), hooks);
  res.memory.save_csv(memory_path);
  save_checkpoint<float>((dir / kAgentFile).string(), res.agent, nullptr,
                  { { "stage", "finetune" }, { "vocab", vocab_signature(vocab) } });
  std::ostringstream summary;
  summary << std::setprecision(9) << "task=" << rc.finetune.task
          << "\ntarget=" << oracle->target() << "\nsteps=" << res.records.size()
          << "\ntop1=" << (res.records.empty() ? kInvalidScore : res.records.back().top1)
          << "\nmemory_size=" << res.memory.size() << '\n';
  auto best = res.memory.sorted();
  if (!best.empty())
    summary << "best=" << best.front().canonical << '\n';
  write_text_file(dir / kSummaryFile, summary.str());
  return { std::move(res.memory), std::move(res.records) };
}

inline FragmentReport cmd_analyze(const RunConfig &rc, const std::string &run_dir,
                                  std::ostream &log) {
  validate_run_config(rc);
  Vocab vocab = Vocab::load(rc.data.vocab);
  std::string ck = rc.analysis.checkpoint;
  if (ck.empty()) {
    for (const char *name: { kAgentFile, kModelFile })
      if (fs::exists(fs::path(run_dir) / name)) {
        ck = (fs::path(run_dir) / name).string();
        break;
      }
    if (ck.empty())
      throw Error(ErrorCode::kIo, "no checkpoint found in " + run_dir);
  }
  Checkpoint<float> model = load_model_for(ck, vocab);
  RunDirLock lock(run_dir);
  std::string task = rc.finetune.task;
  ReportConfig cfg;
  cfg.sample_count = rc.analysis.sample_count;
  cfg.spe = { rc.analysis.min_freq, rc.analysis.augment, stage_seed(rc, "analysis") };
  FragmentReport rep = fragment_report(run_dir, model.model, vocab, task_probes(task), cfg);
  log << "analysis: " << rep.valid << "/" << cfg.sample_count << " valid samples, "
      << rep.table.size() << " merges at min_freq " << rep.min_freq << ", "
      << rep.highlights.size() << " highlight rows in " << (fs::path(run_dir) / "analysis").string()
      << '\n';
  return rep;
}

inline std::string format_score(double s) {
  std::ostringstream os;
  if (s == std::floor(s))
    os << std::fixed << std::setprecision(1) << s;
  else
    os << std::setprecision(6) << s;
  return os.str();
}

struct SpeCommand {
  std::string input;
  std::string merges_in;  // apply mode when set
  std::string merges_out;
  long min_freq = 0;
  int augment = 0;
};

// Trains merges on a corpus file, or applies an existing merge file and
// prints the segments of each line.
inline void cmd_spe(const RunConfig &rc, const SpeCommand &cmd, std::ostream &out,
                    std::ostream &log) {
  std::vector<std::string> lines = read_smiles_file(cmd.input);
  if (!cmd.merges_in.empty()) {
    MergeTable table = load_merges(cmd.merges_in);
    for (const std::string &s: lines) {
      auto toks = split_tokens(s);
      if (!toks) {
        log << "skipping untokenizable line: " << s << '\n';
        continue;
      }
      auto segs = encode(std::move(toks).value(), table);
      for (std::size_t k = 0; k < segs.size(); ++k)
        out << (k ? " " : "") << segs[k];
      out << '\n';
    }
    return;
  }
  HighFreqResult hf = high_freq_count(lines, cmd.min_freq, cmd.augment, stage_seed(rc, "spe"));
  log << "spe: " << lines.size() - hf.dropped << " strings (" << hf.dropped << " dropped), "
      << hf.atomic_tokens << " tokens, min_freq " << hf.min_freq << ", " << hf.count()
      << " merges\n";
  if (!cmd.merges_out.empty())
    save_merges(hf.table, cmd.merges_out);
  else
    for (const Merge &m: hf.table.merges)
      out << m.left << '\t' << m.right << '\t' << m.merged << '\t' << m.frequency << '\n';
}

inline void cmd_score(const std::string &task, const std::vector<std::string> &smiles,
                      std::ostream &out) {
  std::optional<RediscoveryOracle> oracle;
  try {
    oracle.emplace(make_task_oracle(task));
  } catch (const Error &e) {
    throw Error(ErrorCode::kConfig, std::string("task: ") + e.what());
  }
  for (const std::string &s: smiles) {
    if (smiles.size() > 1)
      out << s << '\t';
    out << format_score(oracle->score(s)) << '\n';
  }
}

struct SampleCommand {
  std::string checkpoint;
  int count = 100;
  int max_len = 0;
  double temperature = 1.0;
};

inline void cmd_sample(const RunConfig &rc, const SampleCommand &cmd, std::ostream &out) {
  if (cmd.count < 1)
    throw Error(ErrorCode::kConfig, "sample count must be positive");
  Vocab vocab = Vocab::load(rc.data.vocab);
  Checkpoint<float> ck = load_model_for(cmd.checkpoint, vocab);
  int max_len = cmd.max_len > 0 ? cmd.max_len : ck.model.config().context_len;
  std::vector<SampledSequence> samples =
      sample(ck.model, vocab, cmd.count, stage_seed(rc, "sample"), max_len, cmd.temperature);
  out << "smiles\tvalid\ttruncated\n";
  for (const SampledSequence &s: samples)
    out << detokenize(s.tokens, vocab) << '\t' << (is_valid_sample(s, vocab) ? 1 : 0) << '\t'
        << (s.truncated ? 1 : 0) << '\n';
}

}  // namespace chemlm
