//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <utility>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/mol/molgraph.hpp"

namespace chemlm {

class BitFingerprint {
public:
  BitFingerprint() = default;
  BitFingerprint(int nbits, int radius)
      : words_((static_cast<std::size_t>(nbits) + 63) / 64, 0), nbits_(nbits),
        radius_(radius) { }

  int nbits() const { return nbits_; }
  int radius() const { return radius_; }

  void set(int bit) { words_[bit >> 6] |= std::uint64_t { 1 } << (bit & 63); }
  bool test(int bit) const { return (words_[bit >> 6] >> (bit & 63)) & 1U; }

  int popcount() const {
    int total = 0;
    for (std::uint64_t w: words_)
      total += std::popcount(w);
    return total;
  }

  std::vector<int> on_bits() const {
    std::vector<int> out;
    for (int b = 0; b < nbits_; ++b)
      if (test(b))
        out.push_back(b);
    return out;
  }

  const std::vector<std::uint64_t> &words() const { return words_; }

  friend bool operator==(const BitFingerprint &, const BitFingerprint &) = default;

private:
  std::vector<std::uint64_t> words_;
  int nbits_ = 0;
  int radius_ = 0;
};

inline constexpr int kDefaultFingerprintRadius = 2;
inline constexpr int kDefaultFingerprintBits = 2048;

// Atom identifier at radius 0: (element, degree, charge, implicit H,
// aromatic, ring).
inline std::uint64_t fingerprint_atom_invariant(const MolGraph &mol, int i,
                                                const std::vector<bool> &ring) {
  const Atom &a = mol.atom(i);
  std::uint64_t h = 0x5A17C0DEULL;
  h = hash_combine(h, static_cast<std::uint64_t>(a.element));
  h = hash_combine(h, static_cast<std::uint64_t>(mol.degree(i)));
  h = hash_combine(h, static_cast<std::uint64_t>(a.formal_charge + 16));
  h = hash_combine(h, static_cast<std::uint64_t>(total_hydrogens(mol, i)));
  h = hash_combine(h, a.aromatic ? 1U : 0U);
  h = hash_combine(h, ring[i] ? 1U : 0U);
  return h;
}

inline BitFingerprint circular_fingerprint(const MolGraph &mol,
                                           int radius = kDefaultFingerprintRadius,
                                           int nbits = kDefaultFingerprintBits) {
  if (radius < 0)
    throw Error(ErrorCode::kInvalidArgument, "fingerprint radius must be >= 0");
  if (nbits <= 0 || !std::has_single_bit(static_cast<unsigned>(nbits)))
    throw Error(ErrorCode::kInvalidArgument, "fingerprint width must be a power of two");

  BitFingerprint fp(nbits, radius);
  const int n = mol.num_atoms();
  const std::vector<bool> ring = mol.ring_membership();
  std::vector<std::uint64_t> ids(n), next(n);
  for (int i = 0; i < n; ++i) {
    ids[i] = fingerprint_atom_invariant(mol, i, ring);
    fp.set(static_cast<int>(ids[i] % static_cast<std::uint64_t>(nbits)));
  }

  std::vector<std::pair<std::uint64_t, std::uint64_t>> env;
  for (int iter = 1; iter <= radius; ++iter) {
    for (int i = 0; i < n; ++i) {
      env.clear();
      for (const Neighbor &nb: mol.neighbors(i))
        env.emplace_back(static_cast<std::uint64_t>(mol.bond(nb.bond).order), ids[nb.atom]);
      std::sort(env.begin(), env.end());
      std::uint64_t h = hash_combine(static_cast<std::uint64_t>(iter), ids[i]);
      for (const auto &[order, id]: env)
        h = hash_combine(hash_combine(h, order), id);
      next[i] = h;
      fp.set(static_cast<int>(h % static_cast<std::uint64_t>(nbits)));
    }
    ids.swap(next);
  }
  return fp;
}

inline double tanimoto(const BitFingerprint &a, const BitFingerprint &b) {
  if (a.nbits() != b.nbits())
    throw Error(ErrorCode::kWidthMismatch, "tanimoto operands differ in width");
  int both = 0, either = 0;
  for (std::size_t k = 0; k < a.words().size(); ++k) {
    both += std::popcount(a.words()[k] & b.words()[k]);
    either += std::popcount(a.words()[k] | b.words()[k]);
  }
  if (either == 0)
    return 1.0;
  return static_cast<double>(both) / static_cast<double>(either);
}

}  // namespace chemlm
