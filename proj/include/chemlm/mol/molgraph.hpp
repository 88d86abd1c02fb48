//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "chemlm/mol/element.hpp"

namespace chemlm {

enum class BondOrder : std::uint8_t {
  kSingle = 1,
  kDouble = 2,
  kTriple = 3,
  kAromatic = 4,
};

// Contribution of a bond to its atoms' valence sums; aromatic counts 1.
constexpr int valence_contribution(BondOrder order) {
  return order == BondOrder::kAromatic ? 1 : static_cast<int>(order);
}

// '/' is kUp and '\' is kDown, read from Bond::begin towards Bond::end.
enum class BondDirection : std::uint8_t {
  kNone,
  kUp,
  kDown,
};

constexpr BondDirection flip(BondDirection d) {
  switch (d) {
  case BondDirection::kUp:
    return BondDirection::kDown;
  case BondDirection::kDown:
    return BondDirection::kUp;
  default:
    return d;
  }
}

enum class Chirality : std::uint8_t {
  kNone,
  kCounterClockwise,  // @
  kClockwise,         // @@
};

constexpr Chirality invert(Chirality c) {
  switch (c) {
  case Chirality::kCounterClockwise:
    return Chirality::kClockwise;
  case Chirality::kClockwise:
    return Chirality::kCounterClockwise;
  default:
    return c;
  }
}

// Placeholder in Atom::stereo_order for the bracket hydrogen.
inline constexpr int kStereoHydrogen = -1;

struct Atom {
  int element = elem::kC;
  bool aromatic = false;
  int formal_charge = 0;
  // Set exactly for bracket atoms ("[CH3]" -> 3, "[N+]" -> 0).
  std::optional<int> explicit_h;
  std::optional<int> isotope;
  Chirality chirality = Chirality::kNone;
  // Neighbor order the chirality marker refers to, as read from the source
  // string. Only populated for chiral atoms.
  std::vector<int> stereo_order;

  bool is_bracket() const { return explicit_h.has_value(); }
};

struct Bond {
  int begin;
  int end;
  BondOrder order = BondOrder::kSingle;
  BondDirection direction = BondDirection::kNone;

  int other(int atom) const { return atom == begin ? end : begin; }
};

struct Neighbor {
  int atom;
  int bond;
};

class MolGraph {
public:
  int add_atom(Atom atom) {
    atoms_.push_back(std::move(atom));
    adjacency_.emplace_back();
    return num_atoms() - 1;
  }

  // Returns the new bond index, or -1 for a self loop, an out-of-range
  // endpoint, or an already bonded pair.
  int add_bond(int a, int b, BondOrder order,
               BondDirection direction = BondDirection::kNone) {
    if (a == b || a < 0 || b < 0 || a >= num_atoms() || b >= num_atoms()
        || find_bond(a, b) >= 0)
      return -1;
    int idx = num_bonds();
    bonds_.push_back({ a, b, order, direction });
    adjacency_[a].push_back({ b, idx });
    adjacency_[b].push_back({ a, idx });
    return idx;
  }

  int find_bond(int a, int b) const {
    for (const Neighbor &nb: adjacency_[a])
      if (nb.atom == b)
        return nb.bond;
    return -1;
  }

  int num_atoms() const { return static_cast<int>(atoms_.size()); }
  int num_bonds() const { return static_cast<int>(bonds_.size()); }
  bool empty() const { return atoms_.empty(); }

  const std::vector<Atom> &atoms() const { return atoms_; }
  const std::vector<Bond> &bonds() const { return bonds_; }
  const Atom &atom(int i) const { return atoms_[i]; }
  Atom &atom(int i) { return atoms_[i]; }
  const Bond &bond(int i) const { return bonds_[i]; }
  Bond &bond(int i) { return bonds_[i]; }

  std::span<const Neighbor> neighbors(int atom) const {
    return adjacency_[atom];
  }
  int degree(int atom) const {
    return static_cast<int>(adjacency_[atom].size());
  }

  // Per-atom flag: atom lies on at least one cycle. Recomputed on each call.
  std::vector<bool> ring_membership() const;

  // Number of connected components.
  int num_fragments() const;

  // Cyclomatic number (independent rings).
  int num_rings() const { return num_bonds() - num_atoms() + num_fragments(); }

private:
  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::vector<Neighbor>> adjacency_;
};

inline std::vector<bool> MolGraph::ring_membership() const {
  // Bridge finding by iterative DFS low-link; an atom is on a ring iff it
  // has an incident non-bridge bond.
  const int n = num_atoms();
  std::vector<bool> in_ring(n, false);
  std::vector<int> disc(n, -1), low(n, 0);
  std::vector<bool> bridge(num_bonds(), false);
  struct Frame {
    int atom;
    int parent_bond;
    std::size_t next;
  };
  std::vector<Frame> stack;
  int timer = 0;
  for (int root = 0; root < n; ++root) {
    if (disc[root] >= 0)
      continue;
    disc[root] = low[root] = timer++;
    stack.push_back({ root, -1, 0 });
    while (!stack.empty()) {
      Frame &f = stack.back();
      if (f.next < adjacency_[f.atom].size()) {
        Neighbor nb = adjacency_[f.atom][f.next++];
        if (nb.bond == f.parent_bond)
          continue;
        if (disc[nb.atom] < 0) {
          disc[nb.atom] = low[nb.atom] = timer++;
          stack.push_back({ nb.atom, nb.bond, 0 });
        } else {
          low[f.atom] = std::min(low[f.atom], disc[nb.atom]);
        }
        continue;
      }
      Frame done = f;
      stack.pop_back();
      if (!stack.empty()) {
        int parent = stack.back().atom;
        low[parent] = std::min(low[parent], low[done.atom]);
        if (low[done.atom] > disc[parent])
          bridge[done.parent_bond] = true;
      }
    }
  }
  for (int b = 0; b < num_bonds(); ++b) {
    if (!bridge[b]) {
      in_ring[bonds_[b].begin] = true;
      in_ring[bonds_[b].end] = true;
    }
  }
  return in_ring;
}

inline int MolGraph::num_fragments() const {
  std::vector<bool> seen(num_atoms(), false);
  std::vector<int> stack;
  int count = 0;
  for (int i = 0; i < num_atoms(); ++i) {
    if (seen[i])
      continue;
    ++count;
    seen[i] = true;
    stack.push_back(i);
    while (!stack.empty()) {
      int a = stack.back();
      stack.pop_back();
      for (const Neighbor &nb: adjacency_[a]) {
        if (!seen[nb.atom]) {
          seen[nb.atom] = true;
          stack.push_back(nb.atom);
        }
      }
    }
  }
  return count;
}

// Sum of bond valence contributions (aromatic bonds count 1).
inline int bond_valence_sum(const MolGraph &mol, int atom) {
  int sum = 0;
  for (const Neighbor &nb: mol.neighbors(atom))
    sum += valence_contribution(mol.bond(nb.bond).order);
  return sum;
}

// True if the atom carries a non-aromatic double or triple bond.
inline bool has_multiple_bond(const MolGraph &mol, int atom) {
  for (const Neighbor &nb: mol.neighbors(atom)) {
    BondOrder o = mol.bond(nb.bond).order;
    if (o == BondOrder::kDouble || o == BondOrder::kTriple)
      return true;
  }
  return false;
}

// Hydrogens implied by an unbracketed atom. Aliphatic atoms fill up to the
// lowest allowed valence not below their bond sum. Aromatic atoms reserve
// one valence unit for the aromatic system and only consult the lowest
// valence, so thiophene sulfur and pyridine nitrogen carry none.
inline int implicit_hydrogens(const MolGraph &mol, int atom) {
  const Atom &a = mol.atom(atom);
  if (a.is_bracket())
    return 0;
  ValenceList valences = allowed_valences(a.element, a.formal_charge);
  if (valences.empty())
    return 0;
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

inline int total_hydrogens(const MolGraph &mol, int atom) {
  const Atom &a = mol.atom(atom);
  return a.explicit_h ? *a.explicit_h : implicit_hydrogens(mol, atom);
}

// Per output character: source atom index, or kNoAtom for ring-closure
// digits, bond symbols, parentheses, '%' and '.'.
struct AtomSpanMap {
  static constexpr int kNoAtom = -1;
  std::vector<int> atom_at;

  std::size_t size() const { return atom_at.size(); }
  std::optional<int> at(std::size_t pos) const {
    if (pos >= atom_at.size() || atom_at[pos] == kNoAtom)
      return std::nullopt;
    return atom_at[pos];
  }
};

}  // namespace chemlm
