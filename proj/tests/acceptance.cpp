//
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Long-running criteria train a desk
// model in the working directory.
//
// usage: acceptance [--work-dir DIR] [--resume] [--only N,N,...]
//

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "chemlm/analysis/fragments.hpp"
#include "chemlm/analysis/report.hpp"
#include "chemlm/cli/commands.hpp"
#include "chemlm/lm/train.hpp"
#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/mol/valence.hpp"
#include "chemlm/pipeline/oracle.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "chemlm/text/spe.hpp"
#include "chemlm/text/tokenizer.hpp"
#include "naive_spe.hpp"

#ifndef CHEMLM_DATA_DIR
#define CHEMLM_DATA_DIR "data"
#endif

namespace {

using namespace chemlm;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;
using Tokens = std::vector<std::string>;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string &what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string data_file(const char *name) {
  return (fs::path(CHEMLM_DATA_DIR) / name).string();
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return { std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>() };
}

void parser_round_trip(Outcome &o) {
  auto t0 = Clock::now();
  std::vector<std::string> corpus = read_smiles_file(data_file("corpus_10k.smi"));
  const ParseOptions opts { .allow_multi_fragment = true };
  std::vector<MolGraph> parsed;
  long parseable = 0, round_trips = 0;
  for (const std::string &s: corpus) {
    auto mol = parse_smiles(s, opts);
    if (!mol)
      continue;
    ++parseable;
    auto again = parse_smiles(canonical_smiles(*mol), opts);
    if (again && graphs_isomorphic(*mol, *again))
      ++round_trips;
    if (parsed.size() < 1000)
      parsed.push_back(std::move(*mol));
  }
  long random_ok = 0, random_total = 0;
  for (std::size_t k = 0; k < parsed.size(); ++k)
    for (std::uint64_t r = 0; r < 10; ++r) {
      ++random_total;
      auto w = write_smiles(parsed[k], SmilesOrder::random(k * 10 + r));
      auto back = parse_smiles(w.smiles, opts);
      if (back && graphs_isomorphic(parsed[k], *back))
        ++random_ok;
    }
  double secs = seconds_since(t0);
  o.detail << "corpus=" << corpus.size() << " parseable=" << parseable
           << " round_trips=" << round_trips << " randomized=" << random_ok << "/"
           << random_total << " seconds=" << std::fixed << std::setprecision(1) << secs << ' ';
  o.require(corpus.size() == 10000, "corpus has 10000 molecules");
  o.require(parseable > 0 && round_trips == parseable, "all parseable strings round-trip");
  o.require(random_total == 10000 && random_ok == random_total,
            "1000 x 10 randomized serializations re-parse isomorphic");
  o.require(secs < 60, "runtime < 1 min");
}

void tokenizer_lossless(Outcome &o) {
  std::vector<std::string> corpus = read_smiles_file(data_file("corpus_10k.smi"));
  Vocab corpus_vocab = Vocab::build(corpus);
  long ok = 0;
  for (const std::string &s: corpus) {
    auto ids = tokenize(s, corpus_vocab);
    if (ids && detokenize(*ids, corpus_vocab) == s)
      ++ok;
  }
  Vocab vocab = Vocab::load(data_file("vocab.txt"));
  int table_ok = 0;
  for (const LabeledSmiles &p: target_probes()) {
    auto ids = tokenize(p.smiles, vocab);
    if (ids && detokenize(*ids, vocab) == p.smiles)
      ++table_ok;
  }
  o.detail << "corpus=" << ok << "/" << corpus.size() << " table=" << table_ok << "/9 ";
  o.require(ok == static_cast<long>(corpus.size()), "corpus lossless");
  o.require(table_ok == 9, "table strings lossless");
}

void spe_oracle(Outcome &o) {
  auto t0 = Clock::now();
  static const char *alphabet[] = { "C", "c", "N", "O", "(", ")", "1", "=", "Cl", "[nH]" };
  Rng rng(7001);
  int matched = 0;
  long merges = 0;
  for (int id = 0; id < 100; ++id) {
    std::vector<Tokens> corpus(1 + uniform_index(rng, 200));
    std::size_t span = 2 + uniform_index(rng, 9);
    for (Tokens &seq: corpus) {
      std::size_t len = uniform_index(rng, 21);
      for (std::size_t k = 0; k < len; ++k)
        seq.push_back(alphabet[uniform_index(rng, span)]);
    }
    long mf = 2 + static_cast<long>(uniform_index(rng, 9));
    MergeTable fast = train_merges(corpus, mf);
    MergeTable slow = test::naive_train(corpus, mf);
    merges += static_cast<long>(fast.size());
    if (fast.merges == slow.merges)
      ++matched;
  }
  double secs = seconds_since(t0);
  o.detail << "matched=" << matched << "/100 merges=" << merges << " seconds=" << std::fixed
           << std::setprecision(1) << secs << ' ';
  o.require(matched == 100, "all corpora match the naive oracle");
  o.require(secs < 60, "runtime < 1 min");
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({ std::abs(a), std::abs(b), 1e-6 });
}

void gradient_checks(Outcome &o) {
  const Vocab vocab = Vocab::build(std::vector<std::string> {});
  Transformer<double> model(ModelConfig { 2, 8, 2, 32, 12, vocab.size(), false });
  model.init(31);
  Rng jitter(32);
  for (double &p: model.params())
    p += 0.3 * standard_normal(jitter);
  o.detail << "params=" << model.num_parameters() << ' ';
  o.require(model.num_parameters() <= 5000, "model has <= 5k parameters");

  Rng rng(33);
  std::vector<TokenSequence> batch;
  for (int k = 0; k < 4; ++k) {
    TokenSequence t;
    int len = 1 + static_cast<int>(uniform_index(rng, 9));
    for (int i = 0; i < len; ++i)
      t.push_back(static_cast<int>(uniform_index(rng, vocab.size() - 3)));
    batch.push_back(with_eos(t, vocab));
  }
  std::vector<double> prior { -20.0, -15.5, -30.0, -12.0 }, score { 0.1, -1.0, 0.7, 0.3 };
  const double sigma = 5.0;
  SequenceObjectiveFn objective = [&](const std::vector<double> &logp) {
    SequenceObjective obj;
    obj.dloss_dlogp.resize(logp.size());
    const double m = static_cast<double>(logp.size());
    for (std::size_t i = 0; i < logp.size(); ++i) {
      double r = prior[i] - logp[i] + sigma * score[i];
      obj.loss += reinforce_loss(prior[i], logp[i], score[i], sigma) / m;
      obj.dloss_dlogp[i] = -2.0 * r / m;
    }
    return obj;
  };

  auto check = [&](const char *name, const std::vector<double> &grad,
                   const std::function<double()> &loss, std::uint64_t seed) {
    Rng pick(seed);
    const double h = 1e-5;
    double worst = 0;
    for (int trial = 0; trial < 20; ++trial) {
      std::size_t k = uniform_index(pick, model.num_parameters());
      double saved = model.params()[k];
      model.params()[k] = saved + h;
      double up = loss();
      model.params()[k] = saved - h;
      double down = loss();
      model.params()[k] = saved;
      worst = std::max(worst, rel_err(grad[k], (up - down) / (2 * h)));
    }
    o.detail << name << "_max_rel_err=" << std::scientific << std::setprecision(2) << worst
             << std::defaultfloat << ' ';
    o.require(worst <= 1e-4, std::string(name) + " gradient within 1e-4");
  };

  std::vector<double> grad, scratch;
  ce_loss_and_grad(model, batch, vocab, grad);
  check("ce", grad, [&] { return ce_loss_and_grad(model, batch, vocab, scratch); }, 34);
  sequence_objective_and_grad(model, batch, vocab, objective, grad);
  check("reinforce", grad,
        [&] { return sequence_objective_and_grad(model, batch, vocab, objective, scratch); }, 35);
}

void fixed_points(Outcome &o) {
  bool zero = true;
  for (double p: { -0.5, -10.0, -123.456 })
    for (double sigma: { 1.0, 60.0, 1000.0 })
      zero = zero && reinforce_loss(p, p, 0.0, sigma) == 0.0;
  double v = reinforce_loss(-10, -12, 0.5, 1000);
  RediscoveryOracle oracle(std::string(kDrugTargets[0].canonical));
  double hit = oracle.score(std::string(kDrugTargets[0].canonical));
  double miss = oracle.score("C1CC");
  o.detail << std::setprecision(17) << "loss=" << v << " target=" << hit << " invalid=" << miss
           << ' ';
  o.require(zero, "reinforce_loss(p,p,0,sigma) == 0");
  o.require(v == 252004.0, "reinforce_loss(-10,-12,0.5,1000) == 252004");
  o.require(hit == 1.0, "score(target) == 1");
  o.require(miss == -1.0, "score(invalid) == -1");
}

void substructure_mapping(Outcome &o) {
  const std::string smiles(kDrugTargets[0].canonical);
  auto parsed = parse_smiles_mapped(smiles);
  o.require(parsed.has_value(), "celecoxib parses");
  if (!parsed)
    return;
  const std::string frag = "(S(N)(=O)=O)";
  std::size_t pos = smiles.find(frag);
  o.require(pos != std::string::npos, "fragment present");
  if (pos == std::string::npos)
    return;
  auto atoms = map_substring_to_atoms(smiles, parsed->span_map, pos, pos + frag.size());
  std::multiset<int> elements;
  for (int a: atoms)
    elements.insert(parsed->mol.atom(a).element);
  auto all = map_substring_to_atoms(smiles, parsed->span_map, 0, smiles.size());
  o.detail << "fragment_atoms=" << atoms.size() << " whole_atoms=" << all.size() << ' ';
  o.require(atoms.size() == 4, "fragment maps to 4 atoms");
  o.require(elements == std::multiset<int> { elem::kS, elem::kN, elem::kO, elem::kO },
            "fragment elements are S, N, O, O");
  o.require(all.size() == 26, "whole string maps to 26 atoms");
}

struct LongRun {
  fs::path work;
  bool resume = false;
  RunConfig base;
  std::vector<StepRecord> records;
  bool finetuned = false;
};

void desk_pretraining(LongRun &run, Outcome &o) {
  auto t0 = Clock::now();
  RunConfig rc = run.base;
  rc.out_dir = (run.work / "pretrain").string();
  if (!run.resume)
    fs::remove_all(rc.out_dir);
  PretrainOutcome res = cmd_pretrain(rc, true, std::cerr);
  CsvTable csv = read_numeric_csv((fs::path(rc.out_dir) / kPretrainMetrics).string());
  std::vector<double> loss = csv.series("loss"), valid = csv.series("valid_ratio");
  double secs = seconds_since(t0);
  o.detail << "molecules=" << res.corpus.tokens.size() << " epochs=" << loss.size();
  if (!loss.empty())
    o.detail << " first_loss=" << loss.front() << " final_loss=" << loss.back()
             << " final_valid_ratio=" << valid.back();
  o.detail << " seconds=" << std::fixed << std::setprecision(0) << secs << std::defaultfloat
           << ' ';
  o.require(res.corpus.tokens.size() >= 20000, "corpus >= 20000 molecules");
  o.require(static_cast<int>(loss.size()) == rc.pretrain.epochs, "all epochs recorded");
  o.require(!valid.empty() && valid.back() >= 0.80, "final valid ratio >= 0.80");
  o.require(loss.size() >= 2 && loss.back() < loss.front(), "final loss < first loss");
  if (!run.resume)
    o.require(secs <= 7200, "runtime <= 2 h");
}

RunConfig finetune_config(const LongRun &run, const char *name) {
  RunConfig rc = run.base;
  rc.out_dir = (run.work / name).string();
  rc.finetune.prior = (run.work / "pretrain" / kModelFile).string();
  rc.finetune.task = "celecoxib";
  rc.finetune.track_fragments = true;
  rc.finetune.cfg = FinetuneConfig::desk();
  rc.deterministic = true;
  return rc;
}

void desk_finetuning(LongRun &run, Outcome &o) {
  auto t0 = Clock::now();
  RunConfig rc = finetune_config(run, "finetune_a");
  const FinetuneConfig &cfg = rc.finetune.cfg;
  o.require(cfg.steps == 300 && cfg.batch == 64 && cfg.sigma == 1000 &&
                cfg.lr == 1e-4,
            "desk preset t=300 m=64 sigma=1000 lr=1e-4");
  fs::remove_all(rc.out_dir);
  FinetuneOutcome res = cmd_finetune(rc, std::cerr);
  run.records = res.records;
  run.finetuned = true;
  double secs = seconds_since(t0);
  std::vector<double> mean, top1;
  for (const StepRecord &r: res.records) {
    mean.push_back(r.mean_score);
    top1.push_back(r.top1);
  }
  bool monotone = true;
  for (std::size_t k = 1; k < top1.size(); ++k)
    monotone = monotone && top1[k] >= top1[k - 1];
  double first = window_mean(mean, kTrendWindow, false);
  double last = window_mean(mean, kTrendWindow, true);
  o.detail << std::setprecision(6) << "steps=" << res.records.size()
           << " top1=" << (top1.empty() ? kInvalidScore : top1.back()) << " first10_mean="
           << first << " last10_mean=" << last << " gain=" << last - first
           << " seconds=" << std::fixed << std::setprecision(0) << secs << std::defaultfloat
           << ' ';
  o.require(static_cast<int>(res.records.size()) == cfg.steps, "all steps recorded");
  o.require(!top1.empty() && top1.back() >= 0.4, "top-1 >= 0.4");
  o.require(last - first >= 0.1, "last-10 mean exceeds first-10 mean by >= 0.1");
  o.require(monotone, "top-1 series non-decreasing");
  o.require(secs <= 7200, "runtime <= 2 h");
}

// Mean of the three spellings of a target, per step.
std::vector<double> target_seg_series(const std::vector<StepRecord> &records,
                                      const std::string &target) {
  std::vector<double> out;
  for (const StepRecord &r: records) {
    double sum = 0;
    int n = 0;
    for (const auto &[name, value]: r.extra)
      if (name.rfind("seg_" + target + "_", 0) == 0) {
        sum += value;
        ++n;
      }
    out.push_back(n ? sum / n : std::nan(""));
  }
  return out;
}

void fragment_trends(LongRun &run, Outcome &o) {
  o.require(run.finetuned && !run.records.empty(), "fine-tuning run available");
  if (!o.pass)
    return;
  std::vector<double> nhf;
  for (const StepRecord &r: run.records)
    for (const auto &[name, value]: r.extra)
      if (name == "n_highfreq")
        nhf.push_back(value);
  double nhf0 = window_mean(nhf, kTrendWindow, false);
  double nhf1 = window_mean(nhf, kTrendWindow, true);
  o.detail << std::setprecision(5) << "n_highfreq " << nhf0 << "->" << nhf1 << ' ';
  o.require(nhf.size() == run.records.size() && nhf1 > nhf0, "n_highfreq rises");

  bool off_task_holds = false;
  for (const DrugTarget &t: kDrugTargets) {
    std::vector<double> seg = target_seg_series(run.records, std::string(t.name));
    double a = window_mean(seg, kTrendWindow, false);
    double b = window_mean(seg, kTrendWindow, true);
    o.detail << t.name << " " << a << "->" << b << ' ';
    if (t.name == "celecoxib")
      o.require(b < a, "on-task seg_count falls");
    else
      off_task_holds = off_task_holds || b >= a - 1;
  }
  o.require(off_task_holds, "an off-task seg_count stays within 1 of its start");
}

void determinism(LongRun &run, Outcome &o) {
  fs::path first = run.work / "finetune_a" / kStepMetrics;
  o.require(run.finetuned && fs::exists(first), "first fine-tuning run available");
  if (!o.pass)
    return;
  RunConfig rc = finetune_config(run, "finetune_b");
  fs::remove_all(rc.out_dir);
  cmd_finetune(rc, std::cerr);
  std::string a = slurp(first), b = slurp(fs::path(rc.out_dir) / kStepMetrics);
  o.detail << "bytes=" << a.size() << "/" << b.size() << ' ';
  o.require(!a.empty() && a == b, "metrics CSVs byte-identical");
}

}  // namespace

int main(int argc, char **argv) {
  LongRun run;
  run.work = fs::current_path() / "acceptance_runs";
  std::set<int> only;
  for (int k = 1; k < argc; ++k) {
    std::string arg = argv[k];
    if (arg == "--work-dir" && k + 1 < argc) {
      run.work = fs::absolute(argv[++k]);
    } else if (arg == "--resume") {
      run.resume = true;
    } else if (arg == "--only" && k + 1 < argc) {
      std::stringstream ss(argv[++k]);
      for (std::string item; std::getline(ss, item, ',');)
        only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--work-dir DIR] [--resume] [--only N,N,...]\n";
      return 1;
    }
  }
  fs::create_directories(run.work);
  run.base = default_run_config(CHEMLM_DATA_DIR);
  run.base.seed = 1;
  run.base.deterministic = true;

  struct Criterion {
    int id;
    const char *name;
    std::function<void(Outcome &)> fn;
  };
  const std::vector<Criterion> criteria {
    { 1, "parser round trip", parser_round_trip },
    { 2, "tokenizer lossless", tokenizer_lossless },
    { 3, "SPE oracle equivalence", spe_oracle },
    { 4, "gradient correctness", gradient_checks },
    { 8, "objective fixed points", fixed_points },
    { 9, "substructure mapping", substructure_mapping },
    { 5, "desk pre-training", [&](Outcome &o) { desk_pretraining(run, o); } },
    { 6, "desk RL fine-tuning", [&](Outcome &o) { desk_finetuning(run, o); } },
    { 7, "fragment-count trends", [&](Outcome &o) { fragment_trends(run, o); } },
    { 10, "determinism", [&](Outcome &o) { determinism(run, o); } },
  };

  int failures = 0;
  for (const Criterion &c: criteria) {
    if (!only.empty() && !only.count(c.id))
      continue;
    Outcome o;
    try {
      c.fn(o);
    } catch (const std::exception &e) {
      o.pass = false;
      o.detail << "[exception: " << e.what() << "] ";
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
              << "): " << o.detail.str() << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << failures << " failing" << std::endl;
  return failures ? 1 : 0;
}
