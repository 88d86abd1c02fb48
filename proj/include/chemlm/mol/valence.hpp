//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <string>
#include <vector>

#include "chemlm/mol/element.hpp"
#include "chemlm/mol/molgraph.hpp"

namespace chemlm {

struct ValenceVerdict {
  bool valid = true;
  int atom = -1;  // first offending atom when invalid
  std::string reason;

  explicit operator bool() const { return valid; }
};

// Valence used against the element's table for one atom. Aromatic bonds
// count 1. An uncharged aromatic carbon without an exocyclic multiple bond
// adds 1 for its share of the aromatic pi system; aromatic heteroatoms may
// donate a lone pair instead and add nothing.
inline int valence_in_use(const MolGraph &mol, int atom) {
  const Atom &a = mol.atom(atom);
  int used = bond_valence_sum(mol, atom) + total_hydrogens(mol, atom);
  if (a.aromatic && a.element == elem::kC && a.formal_charge == 0
      && !has_multiple_bond(mol, atom))
    used += 1;
  return used;
}

inline ValenceVerdict check_valence(const MolGraph &mol) {
  std::vector<bool> in_ring = mol.ring_membership();
  for (int i = 0; i < mol.num_atoms(); ++i) {
    const Atom &a = mol.atom(i);
    std::string where = std::string(element_symbol(a.element)) + " atom "
                        + std::to_string(i);
    if (a.aromatic && !in_ring[i])
      return { false, i, "aromatic " + where + " is not on a ring" };
    if (a.aromatic && !can_be_aromatic(a.element))
      return { false, i, where + " cannot be aromatic" };
    ValenceList allowed = allowed_valences(a.element, a.formal_charge);
    if (allowed.empty())
      continue;
    int used = valence_in_use(mol, i);
    if (used > allowed.highest())
      return { false, i,
               where + " uses valence " + std::to_string(used)
                   + ", allowed at most " + std::to_string(allowed.highest()) };
  }
  return {};
}

}  // namespace chemlm
