//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/mol/molgraph.hpp"
#include "chemlm/pipeline/finetune.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "chemlm/text/spe.hpp"
#include "chemlm/text/tokenizer.hpp"

namespace chemlm {

struct SpeConfig {
  long min_freq = 0;  // 0 selects the scaled threshold per batch
  int augment = 0;
  std::uint64_t seed = 0;
};

struct FragmentMetrics {
  int step = 0;
  int n_highfreq = 0;
  long min_freq = 0;
  int dropped = 0;
  std::vector<std::pair<std::string, int>> seg_counts;  // probe label -> segments
};

// Atomic token count of a probe; throws on a string that does not tokenize.
inline int atomic_token_count(std::string_view smiles) {
  auto toks = split_tokens(smiles);
  if (!toks)
    throw Error(ErrorCode::kInvalidArgument, "probe does not tokenize: " + std::string(smiles));
  return static_cast<int>(toks->size());
}

// Probe segmentation works on raw token strings so that probes need not fit
// a model vocabulary.
inline int probe_segment_count(std::string_view smiles, const MergeTable &table) {
  auto toks = split_tokens(smiles);
  if (!toks)
    throw Error(ErrorCode::kInvalidArgument, "probe does not tokenize: " + std::string(smiles));
  return static_cast<int>(encode(std::move(toks).value(), table).size());
}

inline FragmentMetrics per_step_fragment_metrics(const std::vector<std::string> &samples,
                                                 const std::vector<LabeledSmiles> &probes,
                                                 const SpeConfig &spe, int step = 0) {
  HighFreqResult hf = high_freq_count(samples, spe.min_freq, spe.augment, spe.seed);
  FragmentMetrics fm;
  fm.step = step;
  fm.n_highfreq = hf.count();
  fm.min_freq = hf.min_freq;
  fm.dropped = hf.dropped;
  for (const LabeledSmiles &p: probes)
    fm.seg_counts.emplace_back(p.label, probe_segment_count(p.smiles, hf.table));
  return fm;
}

// Finetune hook that appends n_highfreq, spe_min_freq and one seg_<label>
// column per probe to every step record.
inline FinetuneHooks fragment_tracking_hooks(std::vector<LabeledSmiles> probes, SpeConfig spe,
                                             FinetuneHooks base = {}) {
  FinetuneHooks hooks = std::move(base);
  auto previous = hooks.augment;
  hooks.augment = [probes = std::move(probes), spe, previous](const StepBatch &b,
                                                              StepRecord &rec) {
    if (previous)
      previous(b, rec);
    SpeConfig cfg = spe;
    cfg.seed = derive_seed(spe.seed, "analysis/step/" + std::to_string(b.step));
    FragmentMetrics fm = per_step_fragment_metrics(b.smiles, probes, cfg, b.step);
    rec.extra.emplace_back("n_highfreq", fm.n_highfreq);
    rec.extra.emplace_back("spe_min_freq", static_cast<double>(fm.min_freq));
    for (const auto &[label, count]: fm.seg_counts)
      rec.extra.emplace_back("seg_" + label, count);
  };
  return hooks;
}

// Atoms mapped by any character in [begin, end), sorted ascending.
inline std::vector<int> map_substring_to_atoms(std::string_view probe, const AtomSpanMap &span_map,
                                               std::size_t begin, std::size_t end) {
  if (span_map.size() != probe.size())
    throw Error(ErrorCode::kInvalidArgument, "span map does not match the probe string");
  if (begin > end || end > probe.size())
    throw Error(ErrorCode::kSpanOutOfBounds,
                "span [" + std::to_string(begin) + ", " + std::to_string(end)
                    + ") outside a string of length " + std::to_string(probe.size()));
  std::vector<int> atoms;
  for (std::size_t k = begin; k < end; ++k)
    if (auto a = span_map.at(k))
      atoms.push_back(*a);
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  return atoms;
}

// True when the atoms form one connected subgraph; empty sets are not.
inline bool atoms_connected(const MolGraph &mol, const std::vector<int> &atoms) {
  if (atoms.empty())
    return false;
  std::vector<char> member(mol.num_atoms(), 0), seen(mol.num_atoms(), 0);
  for (int a: atoms)
    member[a] = 1;
  std::vector<int> stack { atoms.front() };
  seen[atoms.front()] = 1;
  std::size_t reached = 1;
  while (!stack.empty()) {
    int a = stack.back();
    stack.pop_back();
    for (const Neighbor &nb: mol.neighbors(a))
      if (member[nb.atom] && !seen[nb.atom]) {
        seen[nb.atom] = 1;
        ++reached;
        stack.push_back(nb.atom);
      }
  }
  return reached == atoms.size();
}

struct SubstructureHighlight {
  std::string probe_label;
  std::string probe;
  std::string segment;
  std::size_t span_start = 0;
  std::size_t span_end = 0;
  std::vector<int> atoms;
  bool connected = false;
};

// Every occurrence of every merged segment inside every probe, with the
// atoms it covers. Probes that fail to parse are rejected.
inline std::vector<SubstructureHighlight> locate_segments(const MergeTable &table,
                                                          const std::vector<LabeledSmiles> &probes) {
  std::vector<SubstructureHighlight> out;
  for (const LabeledSmiles &p: probes) {
    auto parsed = parse_smiles_mapped(p.smiles);
    if (!parsed)
      throw Error(ErrorCode::kInvalidArgument, "probe does not parse: " + p.smiles);
    for (const Merge &m: table.merges) {
      for (std::size_t pos = p.smiles.find(m.merged); pos != std::string::npos;
           pos = p.smiles.find(m.merged, pos + 1)) {
        SubstructureHighlight h;
        h.probe_label = p.label;
        h.probe = p.smiles;
        h.segment = m.merged;
        h.span_start = pos;
        h.span_end = pos + m.merged.size();
        h.atoms = map_substring_to_atoms(p.smiles, parsed->span_map, h.span_start, h.span_end);
        h.connected = atoms_connected(parsed->mol, h.atoms);
        out.push_back(std::move(h));
      }
    }
  }
  return out;
}

}  // namespace chemlm
