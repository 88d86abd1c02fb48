//
// SPDX-License-Identifier: Apache-2.0
//

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "chemlm/cli/commands.hpp"

#ifndef CHEMLM_DATA_DIR
#define CHEMLM_DATA_DIR "data"
#endif

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out_dir;
};

void add_common(CLI::App *cmd, CommonFlags &flags) {
  cmd->add_option("--config", flags.config, "Run configuration file");
  cmd->add_option("--seed", flags.seed, "Global seed");
  cmd->add_flag("--deterministic", flags.deterministic, "Serial, bit-reproducible execution");
  cmd->add_option("--out-dir", flags.out_dir, "Run directory");
}

chemlm::RunConfig resolve_config(const CommonFlags &flags) {
  chemlm::RunConfig rc = chemlm::default_run_config(CHEMLM_DATA_DIR);
  if (!flags.config.empty())
    rc = chemlm::load_run_config(flags.config, rc);
  if (flags.seed)
    rc.seed = *flags.seed;
  if (flags.deterministic)
    rc.deterministic = true;
  if (!flags.out_dir.empty())
    rc.out_dir = flags.out_dir;
  rc.out_dir = std::filesystem::absolute(rc.out_dir).lexically_normal().string();
  return rc;
}

int exit_code_for(chemlm::ErrorCode code) {
  return code == chemlm::ErrorCode::kConfig ? kExitUsage : kExitRuntime;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app { "Chemical language model laboratory" };
  app.require_subcommand(1);
  CommonFlags flags;

  auto *pretrain = app.add_subcommand("pretrain", "Filter a corpus and pre-train a model");
  add_common(pretrain, flags);
  bool resume = false;
  std::string corpus;
  pretrain->add_flag("--resume", resume, "Continue from the run's last epoch checkpoint");
  pretrain->add_option("--corpus", corpus, "SMILES corpus, one per line");

  auto *finetune = app.add_subcommand("finetune", "RL fine-tuning toward a rediscovery target");
  add_common(finetune, flags);
  std::string task, prior;
  finetune->add_option("--task", task, "celecoxib, troglitazone, thiothixene or a SMILES");
  finetune->add_option("--prior", prior, "Pre-trained checkpoint");

  auto *analyze = app.add_subcommand("analyze", "Fragment report for a finished run");
  add_common(analyze, flags);
  std::string run_dir, analyze_ck;
  analyze->add_option("--run-dir", run_dir, "Run directory (defaults to --out-dir)");
  analyze->add_option("--checkpoint", analyze_ck, "Model to sample (defaults to the run's)");

  auto *spe = app.add_subcommand("spe", "Train or apply SMILES pair encoding merges");
  add_common(spe, flags);
  chemlm::SpeCommand spe_cmd;
  spe->add_option("--input", spe_cmd.input, "SMILES file")->required();
  spe->add_option("--min-freq", spe_cmd.min_freq, "Minimum pair frequency (0: scaled)");
  spe->add_option("--augment", spe_cmd.augment, "Randomized copies per string");
  spe->add_option("--merges-out", spe_cmd.merges_out, "Write the merge table here");
  spe->add_option("--apply", spe_cmd.merges_in, "Segment the input with this merge table");

  auto *score = app.add_subcommand("score", "Score SMILES against a task");
  add_common(score, flags);
  std::string score_task = "celecoxib";
  std::vector<std::string> score_smiles;
  score->add_option("--task", score_task, "celecoxib, troglitazone, thiothixene or a SMILES");
  score->add_option("smiles", score_smiles, "SMILES to score")->required();

  auto *sample = app.add_subcommand("sample", "Sample SMILES from a checkpoint");
  add_common(sample, flags);
  chemlm::SampleCommand sample_cmd;
  std::string sample_out;
  sample->add_option("--checkpoint", sample_cmd.checkpoint, "Model checkpoint")->required();
  sample->add_option("-n,--count", sample_cmd.count, "Number of samples");
  sample->add_option("--max-len", sample_cmd.max_len, "Token limit (0: context length)");
  sample->add_option("--temperature", sample_cmd.temperature, "Softmax temperature");
  sample->add_option("--output", sample_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    chemlm::RunConfig rc = resolve_config(flags);
    if (pretrain->parsed()) {
      if (!corpus.empty())
        rc.data.corpus = std::filesystem::absolute(corpus).string();
      chemlm::cmd_pretrain(rc, resume, std::cerr);
      std::cout << rc.out_dir << '\n';
    } else if (finetune->parsed()) {
      if (!task.empty())
        rc.finetune.task = task;
      if (!prior.empty())
        rc.finetune.prior = std::filesystem::absolute(prior).string();
      chemlm::cmd_finetune(rc, std::cerr);
      std::cout << rc.out_dir << '\n';
    } else if (analyze->parsed()) {
      if (!analyze_ck.empty())
        rc.analysis.checkpoint = std::filesystem::absolute(analyze_ck).string();
      chemlm::cmd_analyze(rc, run_dir.empty() ? rc.out_dir : run_dir, std::cerr);
    } else if (spe->parsed()) {
      chemlm::cmd_spe(rc, spe_cmd, std::cout, std::cerr);
    } else if (score->parsed()) {
      chemlm::cmd_score(score_task, score_smiles, std::cout);
    } else if (sample->parsed()) {
      if (sample_out.empty()) {
        chemlm::cmd_sample(rc, sample_cmd, std::cout);
      } else {
        std::ofstream out(sample_out, std::ios::binary);
        if (!out)
          throw chemlm::Error(chemlm::ErrorCode::kIo, "cannot write " + sample_out);
        chemlm::cmd_sample(rc, sample_cmd, out);
      }
    }
  } catch (const chemlm::Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
