//
// SPDX-License-Identifier: Apache-2.0
//

#include <set>
#include <string>

#include <gtest/gtest.h>

#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "test_util.hpp"

namespace chemlm {
namespace {

TEST(ParseSmiles, SingleCarbon) {
  auto mol = parse_smiles("C");
  ASSERT_TRUE(mol);
  EXPECT_EQ(mol->num_atoms(), 1);
  EXPECT_EQ(mol->num_bonds(), 0);
  EXPECT_EQ(total_hydrogens(*mol, 0), 4);
}

TEST(ParseSmiles, CelecoxibCounts) {
  auto mol = parse_smiles(kDrugTargets[0].canonical);
  ASSERT_TRUE(mol);
  EXPECT_EQ(mol->num_atoms(), 26);
  EXPECT_EQ(mol->num_bonds(), 28);
  EXPECT_EQ(mol->num_rings(), 3);
  EXPECT_EQ(mol->num_fragments(), 1);
}

TEST(ParseSmiles, AllTableStringsParse) {
  for (const auto &probe: target_probes()) {
    auto mol = parse_smiles(probe.smiles);
    EXPECT_TRUE(mol) << probe.label << ": " << to_string(mol.error());
  }
}

TEST(ParseSmiles, UnclosedRingReportsOpeningDigit) {
  auto mol = parse_smiles("C1CC");
  ASSERT_FALSE(mol);
  EXPECT_EQ(mol.error().kind, ParseErrorKind::kUnclosedRing);
  EXPECT_EQ(mol.error().position, 1);
}

TEST(ParseSmiles, UnbalancedParens) {
  auto open = parse_smiles("C(");
  ASSERT_FALSE(open);
  EXPECT_EQ(open.error().kind, ParseErrorKind::kUnbalancedParen);
  EXPECT_EQ(open.error().position, 1);

  auto close = parse_smiles("CC)C");
  ASSERT_FALSE(close);
  EXPECT_EQ(close.error().kind, ParseErrorKind::kUnbalancedParen);
  EXPECT_EQ(close.error().position, 2);
}

TEST(ParseSmiles, EmptyAndUnknown) {
  auto empty = parse_smiles("");
  ASSERT_FALSE(empty);
  EXPECT_EQ(empty.error().kind, ParseErrorKind::kEmptyInput);

  auto unknown = parse_smiles("CCX");
  ASSERT_FALSE(unknown);
  EXPECT_EQ(unknown.error().kind, ParseErrorKind::kUnknownToken);
  EXPECT_EQ(unknown.error().position, 2);

  auto bad_element = parse_smiles("C[Qq]");
  ASSERT_FALSE(bad_element);
  EXPECT_EQ(bad_element.error().kind, ParseErrorKind::kUnknownToken);

  auto unterminated = parse_smiles("C[NH4+");
  ASSERT_FALSE(unterminated);
  EXPECT_EQ(unterminated.error().position, 1);
}

TEST(ParseSmiles, MultiFragmentBehindFlag) {
  auto rejected = parse_smiles("CC.O");
  ASSERT_FALSE(rejected);
  EXPECT_EQ(rejected.error().kind, ParseErrorKind::kMultiFragmentDisallowed);
  EXPECT_EQ(rejected.error().position, 2);

  auto accepted = parse_smiles("CC.O", { .allow_multi_fragment = true });
  ASSERT_TRUE(accepted);
  EXPECT_EQ(accepted->num_fragments(), 2);
}

TEST(ParseSmiles, SyntaxErrors) {
  for (const char *bad: { "=C", "C=", "C()", "(C)C", "C==C", "C(=)C", "C11",
                          "C12CC12", "C%1C", "C=1CC#1", "C:C" }) {
    auto mol = parse_smiles(bad);
    EXPECT_FALSE(mol) << bad;
  }
}

TEST(ParseSmiles, BracketAtoms) {
  auto mol = parse_smiles("[13CH3][N+](C)(C)[O-]");
  ASSERT_TRUE(mol);
  EXPECT_EQ(mol->atom(0).isotope, 13);
  EXPECT_EQ(mol->atom(0).explicit_h, 3);
  EXPECT_EQ(mol->atom(1).formal_charge, 1);
  EXPECT_EQ(mol->atom(1).explicit_h, 0);
  EXPECT_EQ(mol->atom(4).formal_charge, -1);

  auto charges = parse_smiles("[Fe+++].[Cu--].[Zn+2]", { .allow_multi_fragment = true });
  ASSERT_TRUE(charges);
  EXPECT_EQ(charges->atom(0).formal_charge, 3);
  EXPECT_EQ(charges->atom(1).formal_charge, -2);
  EXPECT_EQ(charges->atom(2).formal_charge, 2);

  auto over = parse_smiles("[C+5]");
  ASSERT_FALSE(over);
  EXPECT_EQ(over.error().kind, ParseErrorKind::kInvalidAtom);
}

TEST(ParseSmiles, AromaticAndRingBonds) {
  auto mol = parse_smiles("c1ccccc1-c1ccccc1");
  ASSERT_TRUE(mol);
  EXPECT_EQ(mol->num_bonds(), 13);
  int singles = 0, aromatic = 0;
  for (const Bond &b: mol->bonds()) {
    singles += b.order == BondOrder::kSingle;
    aromatic += b.order == BondOrder::kAromatic;
  }
  EXPECT_EQ(singles, 1);
  EXPECT_EQ(aromatic, 12);

  auto pct = parse_smiles("C%12CC%12");
  ASSERT_TRUE(pct);
  EXPECT_EQ(pct->num_rings(), 1);

  auto double_closure = parse_smiles("C=1CCCC1");
  ASSERT_TRUE(double_closure);
  EXPECT_EQ(double_closure->bond(double_closure->find_bond(0, 4)).order,
            BondOrder::kDouble);
}

TEST(ParseSmiles, StereoIsCarried) {
  auto mol = parse_smiles("F/C=C/[C@@H](Cl)Br");
  ASSERT_TRUE(mol);
  EXPECT_EQ(mol->bond(0).direction, BondDirection::kUp);
  EXPECT_EQ(mol->atom(3).chirality, Chirality::kClockwise);
  EXPECT_EQ(mol->atom(3).stereo_order,
            (std::vector<int> { 2, kStereoHydrogen, 4, 5 }));
}

TEST(ParseSmiles, SpanMapCoversEveryAtom) {
  auto parsed = parse_smiles_mapped("C[C@@H](Cl)c1ccccc1%10CC%10");
  ASSERT_TRUE(parsed);
  const auto &map = parsed->span_map;
  EXPECT_EQ(map.size(), 27);
  EXPECT_EQ(map.at(0), 0);
  for (std::size_t k = 1; k <= 6; ++k)
    EXPECT_EQ(map.at(k), 1);
  EXPECT_FALSE(map.at(7));  // '('
  EXPECT_EQ(map.at(8), 2);  // 'C' of Cl
  EXPECT_EQ(map.at(9), 2);  // 'l'
  EXPECT_FALSE(map.at(12));  // ring digit
  std::set<int> seen;
  for (int a: map.atom_at)
    if (a >= 0)
      seen.insert(a);
  EXPECT_EQ(static_cast<int>(seen.size()), parsed->mol.num_atoms());
}

TEST(ParseSmiles, RingMembership) {
  auto mol = parse_smiles("CC1CCC1C(C)c1ccccc1");
  ASSERT_TRUE(mol);
  auto ring = mol->ring_membership();
  std::vector<bool> expected { false, true, true, true, true, false, false,
                               true, true, true, true, true, true };
  EXPECT_EQ(ring, expected);
}

TEST(ParseSmiles, ChemblSubsetParses) {
  auto lines = test::read_lines(test::data_path("chembl_subset.smi"));
  ASSERT_GT(lines.size(), 5000u);
  int failures = 0;
  for (const auto &s: lines) {
    auto mol = parse_smiles(s, { .allow_multi_fragment = true });
    if (!mol) {
      ++failures;
      ADD_FAILURE() << s << ": " << to_string(mol.error());
      if (failures > 10)
        break;
    }
  }
  EXPECT_EQ(failures, 0);
}

}  // namespace
}  // namespace chemlm
