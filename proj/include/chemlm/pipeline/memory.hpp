//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/pipeline/oracle.hpp"

namespace chemlm {

struct MemoryEntry {
  std::string canonical;
  double score = 0;
  int step = 0;  // first step the canonical form was seen
  std::string example;
};

struct MemoryItem {
  std::string smiles;
  double score = kInvalidScore;
};

// High-score molecules keyed by canonical SMILES. Overflow evicts the
// lowest score; among equal scores the most recently seen entry goes first,
// then the lexicographically largest canonical form.
class Memory {
public:
  explicit Memory(std::size_t capacity = 1000): capacity_(capacity) {
    if (capacity == 0)
      throw Error(ErrorCode::kInvalidArgument, "memory capacity must be positive");
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Highest score ever evicted; -inf before the first eviction.
  double max_evicted() const { return max_evicted_; }

  // Inserts or raises one entry. Returns false for invalid items.
  bool insert(const std::string &smiles, double score, int step) {
    if (!(score > kInvalidScore))
      return false;
    auto mol = parse_valid(smiles);
    if (!mol)
      return false;
    return insert_canonical(canonical_smiles(*mol), smiles, score, step);
  }

  bool insert_canonical(const std::string &canonical, const std::string &example, double score,
                        int step) {
    if (!(score > kInvalidScore))
      return false;
    auto it = entries_.find(canonical);
    if (it != entries_.end()) {
      MemoryEntry &e = it->second;
      if (score > e.score) {
        order_.erase(key(e));
        e.score = score;
        e.example = example;
        order_.insert(key(e));
      }
      return true;
    }
    MemoryEntry e { canonical, score, step, example };
    order_.insert(key(e));
    entries_.emplace(canonical, std::move(e));
    while (entries_.size() > capacity_) {
      auto victim = order_.begin();
      max_evicted_ = std::max(max_evicted_, std::get<0>(*victim));
      entries_.erase(std::get<2>(*victim));
      order_.erase(victim);
    }
    return true;
  }

  void update(const std::vector<MemoryItem> &items, int step) {
    for (const MemoryItem &it: items)
      insert(it.smiles, it.score, step);
  }

  double top_score() const {
    return order_.empty() ? kInvalidScore : std::get<0>(*order_.rbegin());
  }

  double min_score() const {
    return order_.empty() ? kInvalidScore : std::get<0>(*order_.begin());
  }

  const MemoryEntry *find(const std::string &canonical) const {
    auto it = entries_.find(canonical);
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Entries by descending score, then ascending canonical form.
  std::vector<MemoryEntry> sorted() const {
    std::vector<MemoryEntry> out;
    out.reserve(entries_.size());
    for (const auto &kv: entries_)
      out.push_back(kv.second);
    std::stable_sort(out.begin(), out.end(), [](const MemoryEntry &a, const MemoryEntry &b) {
      return a.score > b.score;
    });
    return out;
  }

  // CSV: canonical_smiles,score,step
  void save_csv(const std::string &path) const {
    std::string tmp = path + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out)
        throw Error(ErrorCode::kIo, "cannot write memory file " + path);
      out << "canonical_smiles,score,step\n";
      out << std::setprecision(9);
      for (const MemoryEntry &e: sorted())
        out << e.canonical << ',' << e.score << ',' << e.step << '\n';
      if (!out)
        throw Error(ErrorCode::kIo, "failed writing memory file " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
      throw Error(ErrorCode::kIo, "cannot rename " + tmp + " to " + path);
  }

private:
  // Ascending order puts the next victim first.
  using Key = std::tuple<double, int, std::string>;

  static Key key(const MemoryEntry &e) { return { e.score, -e.step, e.canonical }; }

  struct KeyLess {
    bool operator()(const Key &a, const Key &b) const {
      if (std::get<0>(a) != std::get<0>(b))
        return std::get<0>(a) < std::get<0>(b);
      if (std::get<1>(a) != std::get<1>(b))
        return std::get<1>(a) < std::get<1>(b);
      return std::get<2>(a) > std::get<2>(b);
    }
  };

  std::size_t capacity_;
  std::map<std::string, MemoryEntry> entries_;
  std::set<Key, KeyLess> order_;
  double max_evicted_ = -std::numeric_limits<double>::infinity();
};

}  // namespace chemlm
