//
// SPDX-License-Identifier: Apache-2.0
//

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/pipeline/targets.hpp"
#include "chemlm/text/tokenizer.hpp"
#include "test_util.hpp"

namespace chemlm {
namespace {

const Vocab &chembl_vocab() {
  static const Vocab vocab =
      Vocab::build(test::read_lines(test::data_path("chembl_subset.smi")));
  return vocab;
}

std::vector<std::string> strings_of(const TokenSequence &ids, const Vocab &vocab) {
  std::vector<std::string> out;
  for (int id: ids)
    out.push_back(vocab.token(id));
  return out;
}

std::string slurp(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(Tokenize, HalogenAndRingDigits) {
  auto ids = tokenize("Clc1ccccc1", chembl_vocab());
  ASSERT_TRUE(ids);
  EXPECT_EQ(strings_of(*ids, chembl_vocab()),
            (std::vector<std::string> { "Cl", "c", "1", "c", "c", "c", "c", "c", "1" }));
}

TEST(Tokenize, BracketIsOneToken) {
  Vocab vocab = Vocab::build(std::vector<std::string> { "[nH]" });
  auto ids = tokenize("[nH]", vocab);
  ASSERT_TRUE(ids);
  ASSERT_EQ(ids->size(), 1u);
  EXPECT_EQ(vocab.token((*ids)[0]), "[nH]");
}

TEST(Tokenize, MultiCharacterClasses) {
  auto toks = split_tokens("C%12CBr[C@@H](Cl)C%12");
  ASSERT_TRUE(toks);
  EXPECT_EQ(*toks, (std::vector<std::string> { "C", "%12", "C", "Br", "[C@@H]", "(", "Cl",
                                                ")", "C", "%12" }));
}

TEST(Tokenize, TableStringsRoundTrip) {
  for (const auto &probe: target_probes()) {
    auto ids = tokenize(probe.smiles, chembl_vocab());
    ASSERT_TRUE(ids) << probe.label;
    EXPECT_EQ(detokenize(*ids, chembl_vocab()), probe.smiles);
  }
}

TEST(Tokenize, Errors) {
  Vocab vocab = Vocab::build(std::vector<std::string> {});
  auto unknown = tokenize("CC[Fe]C", vocab);
  ASSERT_FALSE(unknown);
  EXPECT_EQ(unknown.error().kind, TokenizeErrorKind::kUnknownToken);
  EXPECT_EQ(unknown.error().position, 2u);

  auto open = tokenize("CC[nH", vocab);
  ASSERT_FALSE(open);
  EXPECT_EQ(open.error().kind, TokenizeErrorKind::kUnterminatedBracket);
  EXPECT_EQ(open.error().position, 2u);

  EXPECT_FALSE(tokenize("CCX", vocab));
  EXPECT_FALSE(tokenize("C%1", vocab));
  EXPECT_FALSE(tokenize("C<bos>", vocab));
}

TEST(Detokenize, Basics) {
  const Vocab &v = chembl_vocab();
  EXPECT_EQ(detokenize({}, v), "");
  TokenSequence cco { *v.find("C"), *v.find("C"), *v.find("O") };
  EXPECT_EQ(detokenize(cco, v), "CCO");
  TokenSequence wrapped { v.bos(), *v.find("C"), v.eos(), v.pad() };
  EXPECT_EQ(detokenize(wrapped, v), "C");
}

TEST(Detokenize, TokenSequencesRoundTrip) {
  const Vocab &v = chembl_vocab();
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSequence ids;
    std::size_t len = uniform_index(rng, 30);
    for (std::size_t k = 0; k < len; ++k) {
      int id;
      do
        id = static_cast<int>(uniform_index(rng, v.size()));
      while (v.is_special(id));
      ids.push_back(id);
    }
    auto again = tokenize(detokenize(ids, v), v);
    ASSERT_TRUE(again);
    // "C" followed by "l" cannot be drawn: "l" is not a token. "B" then "r"
    // likewise. So greedy re-splitting is the identity here.
    EXPECT_EQ(*again, ids);
  }
}

TEST(BuildVocab, EmptyCorpusIsBaseSet) {
  Vocab v = Vocab::build(std::vector<std::string> {});
  EXPECT_EQ(v.size(), static_cast<int>(kBaseTokens.size()) + 3);
  EXPECT_EQ(v.token(0), "B");
  EXPECT_EQ(v.token(v.size() - 3), "<bos>");
  EXPECT_EQ(v.token(v.size() - 2), "<eos>");
  EXPECT_EQ(v.token(v.size() - 1), "<pad>");
}

TEST(BuildVocab, BracketInsertedBeforeSpecials) {
  Vocab v = Vocab::build(std::vector<std::string> { "[nH]" });
  EXPECT_EQ(v.size(), static_cast<int>(kBaseTokens.size()) + 4);
  EXPECT_EQ(v.token(static_cast<int>(kBaseTokens.size())), "[nH]");
  Vocab w = Vocab::build(std::vector<std::string> { "C%10CC%10[O-]", "[NH3+]C" });
  std::vector<std::string> tail(w.tokens().begin() + kBaseTokens.size(), w.tokens().end());
  EXPECT_EQ(tail, (std::vector<std::string> { "%10", "[NH3+]", "[O-]", "<bos>", "<eos>", "<pad>" }));
}

TEST(BuildVocab, ChemblSubsetExceedsHundred) {
  EXPECT_GT(chembl_vocab().size(), 100);
}

TEST(BuildVocab, FileIsDeterministicAndReloads) {
  auto dir = std::filesystem::temp_directory_path() / "chemlm_vocab_test";
  std::filesystem::create_directories(dir);
  std::string a = (dir / "a.txt").string(), b = (dir / "b.txt").string();
  chembl_vocab().save(a);
  Vocab::build(test::read_lines(test::data_path("chembl_subset.smi"))).save(b);
  EXPECT_EQ(slurp(a), slurp(b));
  Vocab loaded = Vocab::load(a);
  EXPECT_EQ(loaded, chembl_vocab());
  EXPECT_EQ(loaded.bos(), chembl_vocab().bos());
  EXPECT_THROW(Vocab::load((dir / "missing.txt").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST(Tokenize, CorpusLossless) {
  auto lines = test::read_lines(test::data_path("corpus_10k.smi"));
  Vocab v = Vocab::build(lines);
  for (const std::string &s: lines) {
    auto ids = tokenize(s, v);
    ASSERT_TRUE(ids) << s;
    ASSERT_EQ(detokenize(*ids, v), s);
  }
}

}  // namespace
}  // namespace chemlm
