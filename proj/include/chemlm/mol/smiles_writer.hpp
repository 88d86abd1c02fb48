//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chemlm/core/random.hpp"
#include "chemlm/mol/canonical.hpp"
#include "chemlm/mol/element.hpp"
#include "chemlm/mol/molgraph.hpp"

namespace chemlm {

// Atom visiting order for serialization.
struct SmilesOrder {
  bool randomized = false;
  std::uint64_t seed = 0;

  static SmilesOrder canonical() { return {}; }
  static SmilesOrder random(std::uint64_t seed) { return { true, seed }; }
};

struct WrittenSmiles {
  std::string smiles;
  AtomSpanMap span_map;
};

namespace internal {

// Hydrogen count the atom would get if written without brackets.
inline int unbracketed_hydrogens(const MolGraph &mol, int atom) {
  const Atom &a = mol.atom(atom);
  ValenceList valences = allowed_valences(a.element, 0);
  int sum = bond_valence_sum(mol, atom);
  if (a.aromatic) {
    int h = valences.lowest() - sum - 1;
    return h > 0 ? h : 0;
  }
  for (int i = 0; i < valences.size(); ++i)
    if (valences[i] >= sum)
      return valences[i] - sum;
  return 0;
}

inline int permutation_parity(const std::vector<int> &perm) {
  int inversions = 0;
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (std::size_t j = i + 1; j < perm.size(); ++j)
      if (perm[i] > perm[j])
        ++inversions;
  return inversions & 1;
}

class SmilesWriter {
public:
  SmilesWriter(const MolGraph &mol, SmilesOrder order, bool stereo)
      : mol_(mol), order_(order), stereo_(stereo) { }

  WrittenSmiles run();

private:
  struct RingBond {
    int bond;
    int opener;
    int closer;
    int digit = -1;
  };

  void build_neighbor_orders(Rng &rng);
  void spanning_tree(int root);
  void emit(int atom, int parent);
  void emit_atom(int atom, int parent, const std::vector<int> &ring_partners,
                 const std::vector<int> &children);
  void emit_bond(int bond, int from);
  void put(std::string_view s, int atom = AtomSpanMap::kNoAtom) {
    out_.smiles += s;
    out_.span_map.atom_at.insert(out_.span_map.atom_at.end(), s.size(), atom);
  }
  int allocate_digit();

  const MolGraph &mol_;
  SmilesOrder order_;
  bool stereo_;
  std::vector<int> ranks_;
  std::vector<std::vector<Neighbor>> nbr_order_;
  std::vector<bool> visited_;
  std::vector<int> parent_bond_;
  std::vector<std::vector<int>> children_;
  std::vector<bool> bond_used_;
  std::vector<RingBond> rings_;
  std::vector<std::vector<int>> opens_;   // ring indices opened at atom
  std::vector<std::vector<int>> closes_;  // ring indices closed at atom
  std::vector<bool> digit_busy_ = std::vector<bool>(100, false);
  WrittenSmiles out_;
};

inline void SmilesWriter::build_neighbor_orders(Rng &rng) {
  const int n = mol_.num_atoms();
  nbr_order_.resize(n);
  for (int i = 0; i < n; ++i) {
    auto nbs = mol_.neighbors(i);
    nbr_order_[i].assign(nbs.begin(), nbs.end());
    if (order_.randomized) {
      shuffle_in_place(nbr_order_[i], rng);
    } else {
      std::sort(nbr_order_[i].begin(), nbr_order_[i].end(),
                [&](const Neighbor &a, const Neighbor &b) {
                  return ranks_[a.atom] < ranks_[b.atom];
                });
    }
  }
}

inline void SmilesWriter::spanning_tree(int root) {
  struct Frame {
    int atom;
    std::size_t next;
  };
  std::vector<Frame> stack { { root, 0 } };
  visited_[root] = true;
  while (!stack.empty()) {
    Frame &f = stack.back();
    if (f.next == nbr_order_[f.atom].size()) {
      stack.pop_back();
      continue;
    }
    const Neighbor nb = nbr_order_[f.atom][f.next++];
    if (bond_used_[nb.bond])
      continue;
    bond_used_[nb.bond] = true;
    if (visited_[nb.atom]) {
      int ring = static_cast<int>(rings_.size());
      rings_.push_back({ nb.bond, nb.atom, f.atom });
      opens_[nb.atom].push_back(ring);
      closes_[f.atom].push_back(ring);
    } else {
      visited_[nb.atom] = true;
      parent_bond_[nb.atom] = nb.bond;
      children_[f.atom].push_back(nb.atom);
      stack.push_back({ nb.atom, 0 });
    }
  }
}

inline int SmilesWriter::allocate_digit() {
  for (int d = 1; d < 100; ++d) {
    if (!digit_busy_[d]) {
      digit_busy_[d] = true;
      return d;
    }
  }
  throw std::runtime_error("more than 99 simultaneously open rings");
}

inline void SmilesWriter::emit_bond(int bond, int from) {
  const Bond &b = mol_.bond(bond);
  if (stereo_ && b.direction != BondDirection::kNone) {
    BondDirection d = b.begin == from ? b.direction : flip(b.direction);
    put(d == BondDirection::kUp ? "/" : "\\");
    return;
  }
  switch (b.order) {
  case BondOrder::kSingle:
    if (mol_.atom(b.begin).aromatic && mol_.atom(b.end).aromatic)
      put("-");
    break;
  case BondOrder::kDouble:
    put("=");
    break;
  case BondOrder::kTriple:
    put("#");
    break;
  case BondOrder::kAromatic:
    break;
  }
}

inline void SmilesWriter::emit_atom(int atom, int parent,
                                    const std::vector<int> &ring_partners,
                                    const std::vector<int> &children) {
  const Atom &a = mol_.atom(atom);
  int h = total_hydrogens(mol_, atom);
  Chirality chirality = stereo_ ? a.chirality : Chirality::kNone;

  if (chirality != Chirality::kNone) {
    std::vector<int> written;
    if (parent >= 0)
      written.push_back(parent);
    if (h == 1)
      written.push_back(kStereoHydrogen);
    written.insert(written.end(), ring_partners.begin(), ring_partners.end());
    written.insert(written.end(), children.begin(), children.end());
    std::vector<int> perm;
    for (int w: written) {
      auto it = std::find(a.stereo_order.begin(), a.stereo_order.end(), w);
      if (it == a.stereo_order.end())
        break;
      perm.push_back(static_cast<int>(it - a.stereo_order.begin()));
    }
    if (perm.size() != written.size()
        || written.size() != a.stereo_order.size())
      chirality = Chirality::kNone;
    else if (permutation_parity(perm))
      chirality = invert(chirality);
  }

  bool bracket = chirality != Chirality::kNone || a.formal_charge != 0
                 || a.isotope.has_value()
                 || (a.aromatic ? !is_aromatic_organic(a.element)
                                : !is_organic_subset(a.element))
                 || h != unbracketed_hydrogens(mol_, atom);

  std::string sym(element_symbol(a.element));
  if (a.aromatic)
    for (char &c: sym)
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (!bracket) {
    put(sym, atom);
    return;
  }
  std::string s = "[";
  if (a.isotope)
    s += std::to_string(*a.isotope);
  s += sym;
  if (chirality == Chirality::kCounterClockwise)
    s += "@";
  else if (chirality == Chirality::kClockwise)
    s += "@@";
  if (h > 0) {
    s += "H";
    if (h > 1)
      s += std::to_string(h);
  }
  if (a.formal_charge != 0) {
    s += a.formal_charge > 0 ? "+" : "-";
    int mag = a.formal_charge > 0 ? a.formal_charge : -a.formal_charge;
    if (mag > 1)
      s += std::to_string(mag);
  }
  s += "]";
  put(s, atom);
}

inline void SmilesWriter::emit(int atom, int parent) {
  std::vector<int> ring_partners;
  std::vector<std::pair<int, int>> ring_tokens;  // (ring index, is_open)
  for (int r: closes_[atom]) {
    ring_partners.push_back(rings_[r].opener);
    ring_tokens.push_back({ r, 0 });
  }
  for (int r: opens_[atom]) {
    ring_partners.push_back(rings_[r].closer);
    ring_tokens.push_back({ r, 1 });
  }
  emit_atom(atom, parent, ring_partners, children_[atom]);

  std::vector<int> released;
  for (auto [r, is_open]: ring_tokens) {
    RingBond &rb = rings_[r];
    if (is_open) {
      rb.digit = allocate_digit();
      emit_bond(rb.bond, atom);
    } else {
      released.push_back(rb.digit);
    }
    if (rb.digit < 10)
      put(std::to_string(rb.digit));
    else
      put("%" + std::to_string(rb.digit));
  }
  for (int d: released)
    digit_busy_[d] = false;

  const auto &kids = children_[atom];
  for (std::size_t k = 0; k < kids.size(); ++k) {
    bool branch = k + 1 < kids.size();
    if (branch)
      put("(");
    emit_bond(parent_bond_[kids[k]], atom);
    emit(kids[k], atom);
    if (branch)
      put(")");
  }
}

inline WrittenSmiles SmilesWriter::run() {
  const int n = mol_.num_atoms();
  Rng rng(order_.seed);
  if (!order_.randomized)
    ranks_ = canonical_ranks(mol_);
  build_neighbor_orders(rng);
  visited_.assign(n, false);
  parent_bond_.assign(n, -1);
  children_.assign(n, {});
  bond_used_.assign(mol_.num_bonds(), false);
  opens_.assign(n, {});
  closes_.assign(n, {});

  // Fragment roots: lowest rank per fragment in rank order (canonical), or
  // a uniformly random atom per fragment in random fragment order.
  std::vector<int> atom_order(n);
  std::iota(atom_order.begin(), atom_order.end(), 0);
  if (order_.randomized)
    shuffle_in_place(atom_order, rng);
  else
    std::sort(atom_order.begin(), atom_order.end(),
              [&](int a, int b) { return ranks_[a] < ranks_[b]; });

  std::vector<int> roots;
  for (int a: atom_order) {
    if (visited_[a])
      continue;
    roots.push_back(a);
    spanning_tree(a);
  }
  for (std::size_t k = 0; k < roots.size(); ++k) {
    if (k > 0)
      put(".");
    emit(roots[k], -1);
  }
  return std::move(out_);
}

}  // namespace internal

// Serializes the graph. Canonical order is deterministic and independent of
// atom numbering; random order picks a uniform root and shuffles neighbor
// orders from the seed. Chirality and bond directions are written when
// include_stereo is set, with chirality parity adjusted to the new order.
inline WrittenSmiles write_smiles(const MolGraph &mol, SmilesOrder order,
                                  bool include_stereo = true) {
  return internal::SmilesWriter(mol, order, include_stereo).run();
}

// Stereo-blind canonical string; the identity key for graphs.
inline std::string canonical_smiles(const MolGraph &mol) {
  return write_smiles(mol, SmilesOrder::canonical(), false).smiles;
}

inline bool graphs_isomorphic(const MolGraph &a, const MolGraph &b) {
  if (a.num_atoms() != b.num_atoms() || a.num_bonds() != b.num_bonds())
    return false;
  return canonical_smiles(a) == canonical_smiles(b);
}

}  // namespace chemlm
