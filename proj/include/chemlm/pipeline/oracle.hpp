//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "chemlm/core/error.hpp"
#include "chemlm/lm/sampling.hpp"
#include "chemlm/mol/fingerprint.hpp"
#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/mol/valence.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "chemlm/text/tokenizer.hpp"

namespace chemlm {

inline constexpr double kInvalidScore = -1.0;

// [logp_prior - logp_agent + sigma * score]^2
inline double reinforce_loss(double logp_prior, double logp_agent, double score, double sigma) {
  double r = logp_prior - logp_agent + sigma * score;
  return r * r;
}

// A parsed, valence-checked molecule, or nothing.
inline std::optional<MolGraph> parse_valid(std::string_view smiles) {
  auto mol = parse_smiles(smiles);
  if (!mol || mol->num_atoms() == 0 || !check_valence(*mol))
    return std::nullopt;
  return std::move(mol).value();
}

inline bool is_valid_smiles(std::string_view smiles) { return parse_valid(smiles).has_value(); }

inline bool is_valid_sample(const SampledSequence &s, const Vocab &vocab) {
  return !s.truncated && is_valid_smiles(detokenize(s.tokens, vocab));
}

// Scores a valid molecule; invalid strings never reach it.
using MolScoreFn = std::function<double(const MolGraph &)>;

// Tanimoto similarity to a fixed target on circular fingerprints.
class RediscoveryOracle {
public:
  explicit RediscoveryOracle(std::string_view target_smiles,
                             int radius = kDefaultFingerprintRadius,
                             int nbits = kDefaultFingerprintBits)
      : target_(target_smiles), radius_(radius), nbits_(nbits) {
    auto mol = parse_valid(target_smiles);
    if (!mol)
      throw Error(ErrorCode::kInvalidArgument,
                  "target SMILES must parse and pass valence: " + std::string(target_smiles));
    fp_ = circular_fingerprint(*mol, radius_, nbits_);
  }

  const std::string &target() const { return target_; }
  const BitFingerprint &fingerprint() const { return fp_; }

  double operator()(const MolGraph &mol) const {
    return tanimoto(circular_fingerprint(mol, radius_, nbits_), fp_);
  }

  double score(std::string_view smiles) const {
    auto mol = parse_valid(smiles);
    return mol ? (*this)(*mol) : kInvalidScore;
  }

  MolScoreFn as_function() const {
    return [oracle = *this](const MolGraph &m) { return oracle(m); };
  }

private:
  std::string target_;
  int radius_;
  int nbits_;
  BitFingerprint fp_;
};

// detokenize -> parse -> valence -> fingerprint -> tanimoto; -1 on any
// failure, a truncated sample included.
inline double rediscovery_score(const TokenSequence &tokens, const BitFingerprint &target_fp,
                                const Vocab &vocab, bool truncated = false) {
  if (truncated)
    return kInvalidScore;
  for (int id: tokens)
    if (id < 0 || id >= vocab.size() || vocab.is_special(id))
      return kInvalidScore;
  auto mol = parse_valid(detokenize(tokens, vocab));
  if (!mol)
    return kInvalidScore;
  return tanimoto(circular_fingerprint(*mol, target_fp.radius(), target_fp.nbits()),
                  target_fp);
}

// Task name or a custom target SMILES.
inline RediscoveryOracle make_task_oracle(std::string_view task) {
  if (auto t = find_drug_target(task))
    return RediscoveryOracle(t->canonical);
  return RediscoveryOracle(task);
}

}  // namespace chemlm
