//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/mol/smiles_parser.hpp"
#include "chemlm/mol/smiles_writer.hpp"
#include "chemlm/text/tokenizer.hpp"

namespace chemlm {

// One SMILES per line; the first whitespace-separated field is taken.
// Blank lines and lines starting with "//" or "#" are skipped.
inline std::vector<std::string> read_smiles_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::kIo, "cannot read corpus " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#' || line.compare(start, 2, "//") == 0)
      continue;
    std::size_t stop = line.find_first_of(" \t\r", start);
    out.push_back(line.substr(start, stop == std::string::npos ? std::string::npos : stop - start));
  }
  return out;
}

struct RejectTally {
  long parse_failure = 0;
  long multi_fragment = 0;
  long overlong = 0;
  long rare_token = 0;
  long excluded = 0;

  long total() const { return parse_failure + multi_fragment + overlong + rare_token + excluded; }
};

struct FilteredCorpus {
  std::vector<std::string> smiles;
  std::vector<TokenSequence> tokens;
  RejectTally rejected;
};

// Keeps strings that parse as one fragment, tokenize within the frozen
// vocabulary in at most max_tokens tokens, and whose canonical form is not
// in `exclude`.
inline FilteredCorpus filter_corpus(const std::vector<std::string> &raw, int max_tokens,
                                    const Vocab &vocab,
                                    const std::set<std::string> &exclude = {}) {
  FilteredCorpus out;
  for (const std::string &s: raw) {
    if (s.find('.') != std::string::npos) {
      ++out.rejected.multi_fragment;
      continue;
    }
    auto mol = parse_smiles(s);
    if (!mol) {
      ++out.rejected.parse_failure;
      continue;
    }
    auto split = split_tokens(s);
    if (!split) {
      ++out.rejected.parse_failure;
      continue;
    }
    if (static_cast<int>(split->size()) > max_tokens) {
      ++out.rejected.overlong;
      continue;
    }
    auto ids = tokenize(s, vocab);
    if (!ids) {
      ++out.rejected.rare_token;
      continue;
    }
    if (!exclude.empty() && exclude.count(canonical_smiles(*mol))) {
      ++out.rejected.excluded;
      continue;
    }
    out.smiles.push_back(s);
    out.tokens.push_back(std::move(ids).value());
  }
  return out;
}

}  // namespace chemlm
