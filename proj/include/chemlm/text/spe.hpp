//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/expected.hpp"
#include "chemlm/core/random.hpp"
#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/text/tokenizer.hpp"

namespace chemlm {

struct Merge {
  std::string left;
  std::string right;
  std::string merged;
  long frequency = 0;

  friend bool operator==(const Merge &, const Merge &) = default;
};

struct MergeTable {
  std::vector<Merge> merges;
  long min_freq = 1;

  std::size_t size() const { return merges.size(); }
  bool empty() const { return merges.empty(); }

  friend bool operator==(const MergeTable &, const MergeTable &) = default;
};

namespace internal {

// Non-overlapping left-to-right occurrences of every adjacent pair. A run
// of k identical tokens yields floor(k/2) of that pair.
inline void count_sequence_pairs(const std::vector<int> &seq,
                                 std::vector<std::pair<std::uint64_t, int>> &out) {
  out.clear();
  if (seq.size() < 2)
    return;
  std::vector<std::uint64_t> keys;
  keys.reserve(seq.size());
  std::size_t i = 0;
  while (i + 1 < seq.size()) {
    keys.push_back((static_cast<std::uint64_t>(seq[i]) << 32)
                   | static_cast<std::uint32_t>(seq[i + 1]));
    if (seq[i] == seq[i + 1]) {
      std::size_t run = i;
      while (run + 1 < seq.size() && seq[run + 1] == seq[i])
        ++run;
      std::size_t len = run - i + 1;
      for (std::size_t k = 1; k < len / 2; ++k)
        keys.push_back(keys.back());
      i = run;  // the last run token still pairs with its right neighbor
      continue;
    }
    ++i;
  }
  std::sort(keys.begin(), keys.end());
  for (std::size_t k = 0; k < keys.size();) {
    std::size_t j = k;
    while (j < keys.size() && keys[j] == keys[k])
      ++j;
    out.emplace_back(keys[k], static_cast<int>(j - k));
    k = j;
  }
}

inline void apply_merge(std::vector<int> &seq, int left, int right, int merged) {
  std::size_t w = 0;
  for (std::size_t r = 0; r < seq.size();) {
    if (r + 1 < seq.size() && seq[r] == left && seq[r + 1] == right) {
      seq[w++] = merged;
      r += 2;
    } else {
      seq[w++] = seq[r++];
    }
  }
  seq.resize(w);
}

class SymbolTable {
public:
  int intern(const std::string &s) {
    auto [it, inserted] = ids_.emplace(s, static_cast<int>(names_.size()));
    if (inserted)
      names_.push_back(s);
    return it->second;
  }
  const std::string &name(int id) const { return names_[id]; }

private:
  std::unordered_map<std::string, int> ids_;
  std::deque<std::string> names_;
};

}  // namespace internal

// Learns merges until the most frequent pair occurs fewer than min_freq
// times. Ties go to the lexicographically smallest (left, right).
inline MergeTable train_merges(const std::vector<std::vector<std::string>> &corpus,
                               long min_freq) {
  if (min_freq < 1)
    throw Error(ErrorCode::kInvalidArgument, "min_freq must be >= 1");
  MergeTable table;
  table.min_freq = min_freq;

  internal::SymbolTable symbols;
  std::vector<std::vector<int>> seqs(corpus.size());
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (const std::string &t: corpus[s])
      seqs[s].push_back(symbols.intern(t));

  struct Entry {
    long count;
    const std::string *left;
    const std::string *right;
    std::uint64_t key;
    bool operator<(const Entry &o) const {
      if (count != o.count)
        return count > o.count;
      if (int c = left->compare(*o.left); c != 0)
        return c < 0;
      if (int c = right->compare(*o.right); c != 0)
        return c < 0;
      return key < o.key;
    }
  };
  std::unordered_map<std::uint64_t, long> counts;
  std::unordered_map<std::uint64_t, std::vector<int>> where;
  std::set<Entry> ranked;

  auto entry = [&](std::uint64_t key, long count) {
    return Entry { count, &symbols.name(static_cast<int>(key >> 32)),
                   &symbols.name(static_cast<int>(key & 0xFFFFFFFFULL)), key };
  };
  auto adjust = [&](std::uint64_t key, long delta) {
    long &c = counts[key];
    if (c > 0)
      ranked.erase(entry(key, c));
    c += delta;
    if (c > 0)
      ranked.insert(entry(key, c));
  };

  std::vector<std::pair<std::uint64_t, int>> pairs;
  for (std::size_t s = 0; s < seqs.size(); ++s) {
    internal::count_sequence_pairs(seqs[s], pairs);
    for (const auto &[key, n]: pairs) {
      adjust(key, n);
      where[key].push_back(static_cast<int>(s));
    }
  }

  std::vector<int> stamp(seqs.size(), -1);
  std::vector<std::pair<std::uint64_t, int>> before, after;
  for (int step = 0; !ranked.empty(); ++step) {
    const Entry best = *ranked.begin();
    if (best.count < min_freq)
      break;
    const int left = static_cast<int>(best.key >> 32);
    const int right = static_cast<int>(best.key & 0xFFFFFFFFULL);
    const std::string merged_name = *best.left + *best.right;
    const int merged = symbols.intern(merged_name);
    table.merges.push_back({ *best.left, *best.right, merged_name, best.count });

    std::vector<int> affected = std::move(where[best.key]);
    where.erase(best.key);
    for (int s: affected) {
      if (stamp[s] == step)
        continue;
      stamp[s] = step;
      internal::count_sequence_pairs(seqs[s], before);
      internal::apply_merge(seqs[s], left, right, merged);
      internal::count_sequence_pairs(seqs[s], after);
      for (const auto &[key, n]: before)
        adjust(key, -n);
      for (const auto &[key, n]: after) {
        adjust(key, n);
        where[key].push_back(s);
      }
    }
  }
  return table;
}

// Applies the merges in training order, each exhaustively left to right.
inline std::vector<std::string> encode(std::vector<std::string> tokens,
                                       const MergeTable &table) {
  std::vector<std::string> next;
  for (const Merge &m: table.merges) {
    if (tokens.size() < 2)
      break;
    next.clear();
    for (std::size_t r = 0; r < tokens.size();) {
      if (r + 1 < tokens.size() && tokens[r] == m.left && tokens[r + 1] == m.right) {
        next.push_back(m.merged);
        r += 2;
      } else {
        next.push_back(std::move(tokens[r++]));
      }
    }
    tokens.swap(next);
  }
  return tokens;
}

inline Expected<int, TokenizeError> segment_count(std::string_view smiles,
                                                  const MergeTable &table,
                                                  const Vocab &vocab) {
  auto ids = tokenize(smiles, vocab);
  if (!ids)
    return make_unexpected(ids.error());
  std::vector<std::string> tokens;
  tokens.reserve(ids->size());
  for (int id: *ids)
    tokens.push_back(vocab.token(id));
  return static_cast<int>(encode(std::move(tokens), table).size());
}

// Reference scale: 256 strings per batch with MF 200. Strings are sized at
// the mean atomic token length of the bundled ChEMBL subset (48).
inline constexpr long kReferenceMinFreq = 200;
inline constexpr long kReferenceBatchTokens = 256 * 48;

inline long scaled_min_freq(long batch_tokens) {
  long mf = std::lround(static_cast<double>(kReferenceMinFreq) * static_cast<double>(batch_tokens)
                        / static_cast<double>(kReferenceBatchTokens));
  return std::max(mf, 2L);
}

struct SpeBatch {
  std::vector<std::vector<std::string>> sequences;
  long atomic_tokens = 0;
  int dropped = 0;
};

// Tokenized batch plus `augment` randomized serializations of each string.
// Strings that fail to parse or split are dropped and counted.
inline SpeBatch prepare_spe_batch(const std::vector<std::string> &batch, int augment,
                                  std::uint64_t seed) {
  SpeBatch out;
  Rng rng(seed);
  auto add = [&](std::string_view s) {
    auto toks = split_tokens(s);
    if (!toks)
      return false;
    out.atomic_tokens += static_cast<long>(toks->size());
    out.sequences.push_back(std::move(toks).value());
    return true;
  };
  for (const std::string &s: batch) {
    auto mol = parse_smiles(s);
    if (!mol || !split_tokens(s)) {
      ++out.dropped;
      continue;
    }
    add(s);
    for (int k = 0; k < augment; ++k)
      add(write_smiles(*mol, SmilesOrder::random(rng())).smiles);
  }
  return out;
}

struct HighFreqResult {
  MergeTable table;
  long min_freq = 0;
  long atomic_tokens = 0;
  int dropped = 0;

  int count() const { return static_cast<int>(table.size()); }
};

// min_freq <= 0 selects the scaled threshold for this batch.
inline HighFreqResult high_freq_count(const std::vector<std::string> &batch, long min_freq,
                                      int augment, std::uint64_t seed) {
  SpeBatch prepared = prepare_spe_batch(batch, augment, seed);
  HighFreqResult r;
  r.min_freq = min_freq > 0 ? min_freq : scaled_min_freq(prepared.atomic_tokens);
  r.atomic_tokens = prepared.atomic_tokens;
  r.dropped = prepared.dropped;
  r.table = train_merges(prepared.sequences, r.min_freq);
  return r;
}

inline void save_merges(const MergeTable &table, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::kIo, "cannot write merge file " + path);
  for (const Merge &m: table.merges)
    out << m.left << '\t' << m.right << '\t' << m.merged << '\t' << m.frequency << '\n';
  if (!out)
    throw Error(ErrorCode::kIo, "failed writing merge file " + path);
}

inline MergeTable load_merges(const std::string &path, long min_freq = 1) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read merge file " + path);
  MergeTable table;
  table.min_freq = min_freq;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, '\t'))
      fields.push_back(f);
    if (fields.size() != 4 || fields[0] + fields[1] != fields[2])
      throw Error(ErrorCode::kIo, path + ":" + std::to_string(lineno) + ": malformed merge");
    Merge m { fields[0], fields[1], fields[2], 0 };
    try {
      m.frequency = std::stol(fields[3]);
    } catch (const std::exception &) {
      throw Error(ErrorCode::kIo, path + ":" + std::to_string(lineno) + ": bad frequency");
    }
    table.merges.push_back(std::move(m));
  }
  return table;
}

}  // namespace chemlm
