//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <vector>

#include "chemlm/mol/molgraph.hpp"

namespace chemlm {

namespace internal {

// Replaces each key by its position among the sorted distinct keys.
// Returns the number of distinct classes.
template <class Key>
int dense_rank(const std::vector<Key> &keys, std::vector<int> &ranks) {
  const int n = static_cast<int>(keys.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return keys[a] < keys[b]; });
  ranks.assign(n, 0);
  int cls = 0;
  for (int k = 0; k < n; ++k) {
    if (k > 0 && keys[idx[k - 1]] < keys[idx[k]])
      ++cls;
    ranks[idx[k]] = cls;
  }
  return n == 0 ? 0 : cls + 1;
}

inline int refine_ranks(const MolGraph &mol, std::vector<int> &ranks,
                        int classes) {
  const int n = mol.num_atoms();
  std::vector<std::vector<std::int64_t>> keys(n);
  while (true) {
    for (int i = 0; i < n; ++i) {
      std::vector<std::int64_t> &key = keys[i];
      key.clear();
      key.push_back(ranks[i]);
      std::size_t first = key.size();
      for (const Neighbor &nb: mol.neighbors(i)) {
        auto order = static_cast<std::int64_t>(mol.bond(nb.bond).order);
        key.push_back(order * (n + 1) + ranks[nb.atom]);
      }
      std::sort(key.begin() + static_cast<std::ptrdiff_t>(first), key.end());
    }
    std::vector<int> next;
    int next_classes = dense_rank(keys, next);
    ranks.swap(next);
    if (next_classes == classes)
      return classes;
    classes = next_classes;
  }
}

}  // namespace internal

// Stereo-blind atom invariant that seeds the canonical ranking. Degree
// comes first so terminal atoms rank lowest and start canonical strings.
inline std::array<int, 7> canonical_atom_invariant(const MolGraph &mol, int i,
                                                   const std::vector<bool> &ring) {
  const Atom &a = mol.atom(i);
  return { mol.degree(i),     a.element,
           a.aromatic ? 1 : 0, a.formal_charge,
           total_hydrogens(mol, i), a.isotope.value_or(0),
           ring[i] ? 1 : 0 };
}

// Canonical atom ranks: a permutation of 0..n-1 that depends only on the
// graph, not on its atom numbering. Iterative neighborhood refinement;
// when refinement stalls, the lowest tied class is split by promoting its
// lowest-index member and refinement resumes.
inline std::vector<int> canonical_ranks(const MolGraph &mol) {
  const int n = mol.num_atoms();
  std::vector<bool> ring = mol.ring_membership();
  std::vector<std::array<int, 7>> init(n);
  for (int i = 0; i < n; ++i)
    init[i] = canonical_atom_invariant(mol, i, ring);
  std::vector<int> ranks;
  int classes = internal::dense_rank(init, ranks);
  classes = internal::refine_ranks(mol, ranks, classes);

  while (classes < n) {
    std::vector<int> count(n, 0);
    for (int r: ranks)
      ++count[r];
    int tied = 0;
    while (count[tied] < 2)
      ++tied;
    int chosen = -1;
    for (int i = 0; i < n && chosen < 0; ++i)
      if (ranks[i] == tied)
        chosen = i;
    std::vector<std::array<int, 2>> keys(n);
    for (int i = 0; i < n; ++i)
      keys[i] = { ranks[i], i == chosen ? 0 : 1 };
    classes = internal::dense_rank(keys, ranks);
    classes = internal::refine_ranks(mol, ranks, classes);
  }
  return ranks;
}

}  // namespace chemlm
