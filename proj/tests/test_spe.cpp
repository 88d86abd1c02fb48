//
// SPDX-License-Identifier: Apache-2.0
//

#include <filesystem>
#include <map>

#include <gtest/gtest.h>

#include "chemlm/pipeline/targets.hpp"
#include "chemlm/text/spe.hpp"
#include "naive_spe.hpp"
#include "test_util.hpp"

namespace chemlm {
namespace {

using Tokens = std::vector<std::string>;

std::vector<Tokens> copies(std::string_view s, int n) {
  return std::vector<Tokens>(n, split_tokens(s).value());
}

std::string join(const Tokens &t) {
  std::string out;
  for (const auto &s: t)
    out += s;
  return out;
}

TEST(TrainMerges, FiveCopiesOfEthanol) {
  MergeTable table = train_merges(copies("CCO", 5), 5);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.merges[0], (Merge { "C", "C", "CC", 5 }));
  EXPECT_EQ(table.merges[1], (Merge { "CC", "O", "CCO", 5 }));
  EXPECT_EQ(table.min_freq, 5);
}

TEST(TrainMerges, EmptyAndStarved) {
  EXPECT_TRUE(train_merges({}, 2).empty());
  EXPECT_TRUE(train_merges(copies("CCO", 3), 7).empty());
  EXPECT_THROW(train_merges({}, 0), Error);
}

TEST(TrainMerges, RunsCountNonOverlapping) {
  MergeTable table = train_merges(copies("CCC", 2), 2);
  ASSERT_FALSE(table.empty());
  EXPECT_EQ(table.merges[0], (Merge { "C", "C", "CC", 2 }));
  EXPECT_EQ(train_merges(copies("CCCC", 1), 2).merges.front().frequency, 2);
}

TEST(TrainMerges, PairsStayInsideSequences) {
  // "C" + "C" across the boundary of two "C" strings must not count.
  EXPECT_TRUE(train_merges(copies("C", 50), 1).empty());
}

TEST(TrainMerges, MatchesNaiveOracle) {
  static const char *alphabet[] = { "C", "c", "N", "O", "(", ")", "1", "=", "Cl", "[nH]" };
  Rng rng(2024);
  for (int corpus_id = 0; corpus_id < 100; ++corpus_id) {
    std::vector<Tokens> corpus(1 + uniform_index(rng, 200));
    // Small alphabets per corpus give long merge chains.
    std::size_t span = 2 + uniform_index(rng, 9);
    for (Tokens &seq: corpus) {
      std::size_t len = uniform_index(rng, 21);
      for (std::size_t k = 0; k < len; ++k)
        seq.push_back(alphabet[uniform_index(rng, span)]);
    }
    long mf = 2 + static_cast<long>(uniform_index(rng, 9));
    MergeTable fast = train_merges(corpus, mf);
    MergeTable slow = test::naive_train(corpus, mf);
    ASSERT_EQ(fast.size(), slow.size()) << "corpus " << corpus_id;
    for (std::size_t k = 0; k < fast.size(); ++k)
      ASSERT_EQ(fast.merges[k], slow.merges[k]) << "corpus " << corpus_id << " merge " << k;
  }
}

TEST(Encode, AppliesMergesInOrder) {
  MergeTable table = train_merges(copies("CCO", 5), 5);
  EXPECT_EQ(encode(split_tokens("CCO").value(), table), (Tokens { "CCO" }));
  EXPECT_EQ(encode(split_tokens("CCO").value(), MergeTable {}),
            (Tokens { "C", "C", "O" }));
  EXPECT_EQ(encode(split_tokens("NNc1").value(), table), (Tokens { "N", "N", "c", "1" }));
  EXPECT_EQ(encode(split_tokens("CCCO").value(), table), (Tokens { "CC", "C", "O" }));
}

TEST(Encode, ReconstructsAndCompresses) {
  auto lines = test::read_lines(test::data_path("chembl_subset.smi"));
  std::vector<Tokens> corpus;
  for (std::size_t k = 0; k < 400; ++k)
    corpus.push_back(split_tokens(lines[k]).value());
  MergeTable table = train_merges(corpus, 20);
  EXPECT_GT(table.size(), 10u);
  for (std::size_t k = 0; k < lines.size(); k += 5) {
    Tokens atomic = split_tokens(lines[k]).value();
    Tokens segs = encode(atomic, table);
    EXPECT_EQ(join(segs), lines[k]);
    EXPECT_LE(segs.size(), atomic.size());
  }
}

TEST(SegmentCount, CelecoxibFullyMerged) {
  const Vocab vocab = Vocab::build(test::read_lines(test::data_path("chembl_subset.smi")));
  std::string_view cel = kDrugTargets[0].canonical;
  MergeTable table = train_merges(copies(cel, 256), 200);
  EXPECT_EQ(segment_count(cel, table, vocab).value(), 1);
  int atomic = static_cast<int>(split_tokens(cel).value().size());
  EXPECT_EQ(segment_count(cel, MergeTable {}, vocab).value(), atomic);
  EXPECT_LE(segment_count(kDrugTargets[1].canonical, table, vocab).value(),
            static_cast<int>(split_tokens(kDrugTargets[1].canonical).value().size()));
  EXPECT_FALSE(segment_count("C[Og+]", table, vocab));
}

TEST(HighFreqCount, UniformBatch) {
  std::vector<std::string> batch(256, "CCO");
  EXPECT_EQ(high_freq_count(batch, 200, 0, 1).count(), 2);
  EXPECT_EQ(high_freq_count(batch, 300, 0, 1).count(), 0);
  batch.push_back("C1CC");
  auto r = high_freq_count(batch, 200, 0, 1);
  EXPECT_EQ(r.dropped, 1);
  EXPECT_EQ(r.atomic_tokens, 256 * 3);
}

TEST(HighFreqCount, AugmentationIsSeeded) {
  std::vector<std::string> batch { std::string(kDrugTargets[0].canonical),
                                   std::string(kDrugTargets[1].canonical) };
  auto a = high_freq_count(batch, 3, 10, 77);
  auto b = high_freq_count(batch, 3, 10, 77);
  EXPECT_EQ(a.table, b.table);
  EXPECT_EQ(a.atomic_tokens, b.atomic_tokens);
  EXPECT_GT(a.atomic_tokens, 10 * static_cast<long>(split_tokens(batch[0]).value().size()));
}

TEST(ScaledMinFreq, ReferencePointAndFloor) {
  EXPECT_EQ(scaled_min_freq(kReferenceBatchTokens), 200);
  EXPECT_EQ(scaled_min_freq(kReferenceBatchTokens / 4), 50);
  EXPECT_EQ(scaled_min_freq(10), 2);
  EXPECT_EQ(scaled_min_freq(0), 2);
}

TEST(MergeFile, RoundTrip) {
  auto lines = test::read_lines(test::data_path("chembl_subset.smi"));
  std::vector<Tokens> corpus;
  for (std::size_t k = 0; k < 300; ++k)
    corpus.push_back(split_tokens(lines[k]).value());
  MergeTable table = train_merges(corpus, 15);
  auto path = (std::filesystem::temp_directory_path() / "chemlm_merges.tsv").string();
  save_merges(table, path);
  EXPECT_EQ(load_merges(path, 15), table);
  std::filesystem::remove(path);
  EXPECT_THROW(load_merges(path), Error);
}

}  // namespace
}  // namespace chemlm
