//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chemlm {

// A rediscovery target with one canonical and two randomized spellings.
struct DrugTarget {
  std::string_view name;
  std::string_view canonical;
  std::string_view rand1;
  std::string_view rand2;
};

// clang-format off
inline constexpr std::array<DrugTarget, 3> kDrugTargets = { {
  { "celecoxib",
    "Cc1ccc(-c2cc(C(F)(F)F)nn2-c2ccc(S(N)(=O)=O)cc2)cc1",
    "c1(-c2ccc(C)cc2)n(-c2ccc(S(N)(=O)=O)cc2)nc(C(F)(F)F)c1",
    "c1c(S(N)(=O)=O)ccc(-n2nc(C(F)(F)F)cc2-c2ccc(C)cc2)c1" },
  { "troglitazone",
    "Cc1c(C)c2c(c(C)c1O)CCC(C)(COc1ccc(CC3SC(=O)NC3=O)cc1)O2",
    "CC1(COc2ccc(CC3C(=O)NC(=O)S3)cc2)Oc2c(C)c(C)c(O)c(C)c2CC1",
    "c12c(c(C)c(O)c(C)c1C)CCC(C)(COc1ccc(CC3C(=O)NC(=O)S3)cc1)O2" },
  { "thiothixene",
    "CN1CCN(CC/C=C2/c3ccccc3Sc3ccc(S(=O)(=O)N(C)C)cc32)CC1",
    "c1cc2c(cc1)Sc1c(cc(S(=O)(=O)N(C)C)cc1)/C2=C\\CCN1CCN(C)CC1",
    "c1cc2c(cc1)/C(=C/CCN1CCN(C)CC1)c1cc(S(=O)(N(C)C)=O)ccc1S2" },
} };
// clang-format on

inline std::optional<DrugTarget> find_drug_target(std::string_view name) {
  for (const DrugTarget &t: kDrugTargets)
    if (t.name == name)
      return t;
  return std::nullopt;
}

struct LabeledSmiles {
  std::string label;
  std::string smiles;
};

// The nine spellings as fragment-analysis probes, labeled
// "<drug>_canonical", "<drug>_rand1", "<drug>_rand2".
inline std::vector<LabeledSmiles> target_probes() {
  std::vector<LabeledSmiles> probes;
  for (const DrugTarget &t: kDrugTargets) {
    probes.push_back({ std::string(t.name) + "_canonical", std::string(t.canonical) });
    probes.push_back({ std::string(t.name) + "_rand1", std::string(t.rand1) });
    probes.push_back({ std::string(t.name) + "_rand2", std::string(t.rand2) });
  }
  return probes;
}

}  // namespace chemlm
