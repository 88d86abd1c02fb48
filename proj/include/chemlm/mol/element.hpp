//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace chemlm {

inline constexpr int kMaxAtomicNumber = 118;

// clang-format off
inline constexpr std::array<std::string_view, kMaxAtomicNumber + 1> kElementSymbols = {
  "*",
  "H", "He",
  "Li", "Be", "B", "C", "N", "O", "F", "Ne",
  "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar",
  "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
  "Ga", "Ge", "As", "Se", "Br", "Kr",
  "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
  "In", "Sn", "Sb", "Te", "I", "Xe",
  "Cs", "Ba",
  "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er",
  "Tm", "Yb", "Lu",
  "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
  "Tl", "Pb", "Bi", "Po", "At", "Rn",
  "Fr", "Ra",
  "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
  "Md", "No", "Lr",
  "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
  "Lv", "Ts", "Og",
};
// clang-format on

namespace elem {
inline constexpr int kH = 1;
inline constexpr int kB = 5;
inline constexpr int kC = 6;
inline constexpr int kN = 7;
inline constexpr int kO = 8;
inline constexpr int kF = 9;
inline constexpr int kSi = 14;
inline constexpr int kP = 15;
inline constexpr int kS = 16;
inline constexpr int kCl = 17;
inline constexpr int kAs = 33;
inline constexpr int kSe = 34;
inline constexpr int kBr = 35;
inline constexpr int kTe = 52;
inline constexpr int kI = 53;
}  // namespace elem

constexpr std::string_view element_symbol(int z) {
  return z >= 0 && z <= kMaxAtomicNumber ? kElementSymbols[z] : "?";
}

// Returns 0 when the symbol is not an element.
constexpr int atomic_number(std::string_view symbol) {
  for (int z = 1; z <= kMaxAtomicNumber; ++z)
    if (kElementSymbols[z] == symbol)
      return z;
  return 0;
}

// B C N O P S F Cl Br I may appear without brackets.
constexpr bool is_organic_subset(int z) {
  switch (z) {
  case elem::kB:
  case elem::kC:
  case elem::kN:
  case elem::kO:
  case elem::kP:
  case elem::kS:
  case elem::kF:
  case elem::kCl:
  case elem::kBr:
  case elem::kI:
    return true;
  default:
    return false;
  }
}

// b c n o p s may appear without brackets; se as te only inside them.
constexpr bool is_aromatic_organic(int z) {
  switch (z) {
  case elem::kB:
  case elem::kC:
  case elem::kN:
  case elem::kO:
  case elem::kP:
  case elem::kS:
    return true;
  default:
    return false;
  }
}

constexpr bool can_be_aromatic(int z) {
  return is_aromatic_organic(z) || z == elem::kSe || z == elem::kAs
         || z == elem::kTe;
}

namespace internal {
struct ValenceEntry {
  std::array<std::int8_t, 3> values;
  std::int8_t count;
};

constexpr ValenceEntry base_valences(int z) {
  switch (z) {
  case elem::kH:
    return { { 1 }, 1 };
  case elem::kB:
    return { { 3 }, 1 };
  case elem::kC:
  case elem::kSi:
  case 32:  // Ge
    return { { 4 }, 1 };
  case elem::kN:
    return { { 3 }, 1 };
  case elem::kO:
    return { { 2 }, 1 };
  case elem::kP:
  case elem::kAs:
    return { { 3, 5 }, 2 };
  case elem::kS:
  case elem::kSe:
  case elem::kTe:
    return { { 2, 4, 6 }, 3 };
  case elem::kF:
  case elem::kCl:
  case elem::kBr:
  case elem::kI:
    return { { 1 }, 1 };
  default:
    return { {}, 0 };
  }
}

// Main-group p-block rows used for the isoelectronic charge shift.
constexpr int period_of(int z) {
  if (z <= 2)
    return 1;
  if (z <= 10)
    return 2;
  if (z <= 18)
    return 3;
  if (z <= 36)
    return 4;
  if (z <= 54)
    return 5;
  return 6;
}
}  // namespace internal

// Allowed valences of an element carrying a formal charge. A charged atom
// behaves like the same-row element with atomic number Z - charge
// (N+ like C, O- like F, C- like N). Empty when unconstrained.
class ValenceList {
public:
  constexpr ValenceList() = default;
  constexpr ValenceList(internal::ValenceEntry e): e_(e) { }

  constexpr bool empty() const { return e_.count == 0; }
  constexpr int size() const { return e_.count; }
  constexpr int operator[](int i) const { return e_.values[i]; }
  constexpr int lowest() const { return e_.values[0]; }
  constexpr int highest() const { return e_.values[e_.count - 1]; }

private:
  internal::ValenceEntry e_ { {}, 0 };
};

constexpr ValenceList allowed_valences(int z, int charge) {
  if (charge == 0)
    return internal::base_valences(z);
  if (z == elem::kH)
    return internal::ValenceEntry { { 0 }, 1 };
  int shifted = z - charge;
  if (internal::base_valences(z).count == 0 || shifted <= 0
      || internal::period_of(shifted) != internal::period_of(z))
    return {};
  // Lighter than boron in its row (e.g. B+ or C++) keeps the neutral
  // table minus the charge magnitude.
  auto entry = internal::base_valences(shifted);
  if (entry.count == 0) {
    int v = internal::base_valences(z).values[0] - (charge > 0 ? charge : -charge);
    if (v < 0)
      return {};
    return internal::ValenceEntry { { static_cast<std::int8_t>(v) }, 1 };
  }
  return entry;
}

}  // namespace chemlm
