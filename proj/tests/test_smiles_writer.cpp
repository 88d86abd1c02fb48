//
// SPDX-License-Identifier: Apache-2.0
//

#include <set>
#include <string>

#include <gtest/gtest.h>

#include "chemlm/mol/canonical.hpp"
#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/mol/valence.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "test_util.hpp"

namespace chemlm {
namespace {

MolGraph must_parse(std::string_view s) {
  auto mol = parse_smiles(s);
  if (!mol)
    throw std::runtime_error(to_string(mol.error()));
  return std::move(mol).value();
}

TEST(CanonicalRanks, SameGraphSameRanks) {
  auto a = must_parse("CCO"), b = must_parse("OCC");
  auto ra = canonical_ranks(a), rb = canonical_ranks(b);
  std::multiset<int> ma(ra.begin(), ra.end()), mb(rb.begin(), rb.end());
  EXPECT_EQ(ma, mb);
  EXPECT_EQ(canonical_smiles(a), canonical_smiles(b));
  EXPECT_EQ(canonical_smiles(a), "CCO");
}

TEST(CanonicalRanks, SingleAtomRankZero) {
  EXPECT_EQ(canonical_ranks(must_parse("N")), std::vector<int> { 0 });
}

TEST(CanonicalRanks, RanksArePermutation) {
  auto mol = must_parse(kDrugTargets[1].canonical);
  auto ranks = canonical_ranks(mol);
  std::set<int> unique(ranks.begin(), ranks.end());
  EXPECT_EQ(static_cast<int>(unique.size()), mol.num_atoms());
  EXPECT_EQ(*unique.rbegin(), mol.num_atoms() - 1);
}

TEST(CanonicalSmiles, TableSpellingsAgree) {
  for (const DrugTarget &t: kDrugTargets) {
    std::string c = canonical_smiles(must_parse(t.canonical));
    EXPECT_EQ(canonical_smiles(must_parse(t.rand1)), c) << t.name;
    EXPECT_EQ(canonical_smiles(must_parse(t.rand2)), c) << t.name;
  }
}

TEST(CanonicalSmiles, Idempotent) {
  for (const char *s: { "CCO", "c1ccccc1O", "OC(=O)C1CC1C#N",
                        "Cc1ccc(-c2cc(C(F)(F)F)nn2-c2ccc(S(N)(=O)=O)cc2)cc1" }) {
    std::string once = canonical_smiles(must_parse(s));
    std::string twice = canonical_smiles(must_parse(once));
    EXPECT_EQ(once, twice) << s;
  }
}

TEST(CanonicalSmiles, InvariantUnderRenumbering) {
  auto lines = test::read_lines(test::data_path("corpus_10k.smi"));
  int checked = 0;
  for (std::size_t k = 0; k < lines.size() && checked < 300; k += 31) {
    auto mol = parse_smiles(lines[k], { .allow_multi_fragment = true });
    if (!mol)
      continue;
    ++checked;
    std::string ref = canonical_smiles(*mol);
    for (std::uint64_t seed = 1; seed <= 3; ++seed)
      EXPECT_EQ(canonical_smiles(test::permute_graph(*mol, seed)), ref)
          << lines[k];
  }
  EXPECT_GT(checked, 250);
}

TEST(GraphsIsomorphic, Basics) {
  auto a = must_parse("CCO");
  EXPECT_TRUE(graphs_isomorphic(a, a));
  EXPECT_FALSE(graphs_isomorphic(a, must_parse("CCC")));
  EXPECT_TRUE(graphs_isomorphic(must_parse(kDrugTargets[1].canonical),
                                must_parse(kDrugTargets[1].rand2)));
  // Stereo is ignored.
  EXPECT_TRUE(graphs_isomorphic(must_parse("F/C=C/F"), must_parse("F/C=C\\F")));
  EXPECT_TRUE(graphs_isomorphic(must_parse("N[C@@H](C)O"), must_parse("N[C@H](C)O")));
}

TEST(RandomizedSmiles, EthanolMatchesBruteForceEnumeration) {
  auto mol = must_parse("CCO");
  std::set<std::string> oracle = test::all_tree_serializations(mol);
  EXPECT_EQ(oracle, (std::set<std::string> { "CCO", "OCC", "C(C)O", "C(O)C" }));
  std::set<std::string> produced;
  for (std::uint64_t seed = 0; seed < 200; ++seed)
    produced.insert(write_smiles(mol, SmilesOrder::random(seed)).smiles);
  EXPECT_EQ(produced, oracle);
}

TEST(RandomizedSmiles, BranchedTreeMatchesEnumeration) {
  auto mol = must_parse("CC(N)(O)CS");
  std::set<std::string> oracle = test::all_tree_serializations(mol);
  std::set<std::string> produced;
  for (std::uint64_t seed = 0; seed < 4000; ++seed)
    produced.insert(write_smiles(mol, SmilesOrder::random(seed)).smiles);
  EXPECT_EQ(produced, oracle);
}

TEST(RandomizedSmiles, FixedSeedDeterministic) {
  auto mol = must_parse(kDrugTargets[0].canonical);
  auto a = write_smiles(mol, SmilesOrder::random(42)).smiles;
  auto b = write_smiles(mol, SmilesOrder::random(42)).smiles;
  EXPECT_EQ(a, b);
}

TEST(RandomizedSmiles, ReparsesIsomorphic) {
  for (const DrugTarget &t: kDrugTargets) {
    auto mol = must_parse(t.canonical);
    std::string key = canonical_smiles(mol);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto written = write_smiles(mol, SmilesOrder::random(seed));
      auto back = parse_smiles(written.smiles);
      ASSERT_TRUE(back) << written.smiles;
      EXPECT_EQ(canonical_smiles(*back), key) << written.smiles;
      EXPECT_TRUE(check_valence(*back)) << written.smiles;
    }
  }
}

TEST(WriteSmiles, SpanMapAlignsAtoms) {
  auto mol = must_parse("C[C@@H](Cl)c1ccc[nH]1");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto w = write_smiles(mol, SmilesOrder::random(seed));
    ASSERT_EQ(w.span_map.size(), w.smiles.size());
    std::set<int> seen;
    for (std::size_t k = 0; k < w.smiles.size(); ++k) {
      auto atom = w.span_map.at(k);
      char c = w.smiles[k];
      bool punct = c == '(' || c == ')' || std::isdigit(static_cast<unsigned char>(c))
                   || c == '-' || c == '=' || c == '%';
      bool in_bracket = atom && mol.atom(*atom).is_bracket();
      if (punct && !in_bracket)
        EXPECT_FALSE(atom) << w.smiles << " @" << k;
      if (atom) {
        EXPECT_LT(*atom, mol.num_atoms());
        seen.insert(*atom);
      }
    }
    EXPECT_EQ(static_cast<int>(seen.size()), mol.num_atoms());
  }
}

TEST(WriteSmiles, ChiralityParityFollowsOrder) {
  auto ref = must_parse("F[C@H](Cl)Br");
  std::string key = write_smiles(ref, SmilesOrder::canonical()).smiles;
  EXPECT_EQ(write_smiles(must_parse("[C@@H](F)(Cl)Br"), SmilesOrder::canonical()).smiles,
            key);
  EXPECT_EQ(write_smiles(must_parse("F[C@@H](Br)Cl"), SmilesOrder::canonical()).smiles,
            key);
  EXPECT_NE(write_smiles(must_parse("F[C@@H](Cl)Br"), SmilesOrder::canonical()).smiles,
            key);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto w = write_smiles(ref, SmilesOrder::random(seed));
    auto back = must_parse(w.smiles);
    EXPECT_EQ(write_smiles(back, SmilesOrder::canonical()).smiles, key) << w.smiles;
  }
}

TEST(WriteSmiles, RingChiralityAndDirections) {
  auto ref = must_parse("C[C@H]1CCC[C@@H](O)C1");
  std::string key = write_smiles(ref, SmilesOrder::canonical()).smiles;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto w = write_smiles(ref, SmilesOrder::random(seed));
    EXPECT_EQ(write_smiles(must_parse(w.smiles), SmilesOrder::canonical()).smiles, key)
        << w.smiles;
  }
  auto thio = must_parse(kDrugTargets[2].canonical);
  std::string tkey = write_smiles(thio, SmilesOrder::canonical()).smiles;
  EXPECT_NE(tkey.find_first_of("/\\"), std::string::npos);
  EXPECT_EQ(canonical_smiles(thio).find_first_of("/\\"), std::string::npos);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto w = write_smiles(thio, SmilesOrder::random(seed));
    EXPECT_EQ(write_smiles(must_parse(w.smiles), SmilesOrder::canonical()).smiles, tkey)
        << w.smiles;
  }
}

TEST(WriteSmiles, CorpusRoundTrip) {
  auto lines = test::read_lines(test::data_path("chembl_subset.smi"));
  for (std::size_t k = 0; k < lines.size(); k += 7) {
    auto mol = parse_smiles(lines[k], { .allow_multi_fragment = true });
    ASSERT_TRUE(mol) << lines[k];
    std::string key = canonical_smiles(*mol);
    auto again = parse_smiles(key, { .allow_multi_fragment = true });
    ASSERT_TRUE(again) << key;
    EXPECT_EQ(canonical_smiles(*again), key) << lines[k];
    auto rnd = write_smiles(*mol, SmilesOrder::random(k));
    auto back = parse_smiles(rnd.smiles, { .allow_multi_fragment = true });
    ASSERT_TRUE(back) << rnd.smiles;
    EXPECT_EQ(canonical_smiles(*back), key) << lines[k] << " -> " << rnd.smiles;
  }
}

}  // namespace
}  // namespace chemlm
