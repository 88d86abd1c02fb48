//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chemlm/core/error.hpp"
#include "chemlm/core/expected.hpp"

namespace chemlm {

using TokenSequence = std::vector<int>;

enum class TokenizeErrorKind {
  kUnknownToken,
  kUnterminatedBracket,
};

struct TokenizeError {
  TokenizeErrorKind kind;
  std::size_t position = 0;
  std::string token;
};

inline std::string to_string(const TokenizeError &e) {
  std::string what = e.kind == TokenizeErrorKind::kUnknownToken ? "UnknownToken"
                                                                 : "UnterminatedBracket";
  return what + " at " + std::to_string(e.position)
         + (e.token.empty() ? "" : " '" + e.token + "'");
}

inline constexpr std::string_view kBosToken = "<bos>";
inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kPadToken = "<pad>";

// clang-format off
inline constexpr std::array<std::string_view, 35> kBaseTokens = {
  "B", "C", "N", "O", "P", "S", "F", "Cl", "Br", "I",
  "b", "c", "n", "o", "p", "s",
  "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
  "-", "=", "#", ":", "/", "\\", "(", ")", ".",
};
// clang-format on

// Splits SMILES into atomic-level token strings: "[...]", "%nn", Cl and Br
// as units, every other character alone. No vocabulary check.
inline Expected<std::vector<std::string>, TokenizeError>
split_tokens(std::string_view smiles) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < smiles.size()) {
    char c = smiles[i];
    std::size_t len = 1;
    if (c == '[') {
      std::size_t close = smiles.find(']', i + 1);
      if (close == std::string_view::npos)
        return make_unexpected(TokenizeError { TokenizeErrorKind::kUnterminatedBracket, i, "" });
      len = close - i + 1;
    } else if (c == '%') {
      if (i + 2 >= smiles.size() || !std::isdigit(static_cast<unsigned char>(smiles[i + 1]))
          || !std::isdigit(static_cast<unsigned char>(smiles[i + 2])))
        return make_unexpected(TokenizeError { TokenizeErrorKind::kUnknownToken, i, "%" });
      len = 3;
    } else if (i + 1 < smiles.size()
               && ((c == 'C' && smiles[i + 1] == 'l') || (c == 'B' && smiles[i + 1] == 'r'))) {
      len = 2;
    }
    out.emplace_back(smiles.substr(i, len));
    i += len;
  }
  return out;
}

class Vocab {
public:
  Vocab() = default;

  // Tokens in id order; must include <bos>, <eos> and <pad>.
  explicit Vocab(std::vector<std::string> tokens): tokens_(std::move(tokens)) {
    for (std::size_t k = 0; k < tokens_.size(); ++k)
      if (!lookup_.emplace(tokens_[k], static_cast<int>(k)).second)
        throw Error(ErrorCode::kInvalidArgument, "duplicate vocabulary token '" + tokens_[k] + "'");
    bos_ = require(kBosToken);
    eos_ = require(kEosToken);
    pad_ = require(kPadToken);
  }

  template <class Range>
  static Vocab build(const Range &corpus) {
    std::set<std::string> percent, bracket;
    for (const auto &smiles: corpus) {
      auto toks = split_tokens(smiles);
      if (!toks)
        continue;
      for (const std::string &t: *toks) {
        if (t.front() == '[')
          bracket.insert(t);
        else if (t.front() == '%')
          percent.insert(t);
      }
    }
    std::vector<std::string> tokens(kBaseTokens.begin(), kBaseTokens.end());
    tokens.insert(tokens.end(), percent.begin(), percent.end());
    tokens.insert(tokens.end(), bracket.begin(), bracket.end());
    tokens.emplace_back(kBosToken);
    tokens.emplace_back(kEosToken);
    tokens.emplace_back(kPadToken);
    return Vocab(std::move(tokens));
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  int bos() const { return bos_; }
  int eos() const { return eos_; }
  int pad() const { return pad_; }
  bool is_special(int id) const { return id == bos_ || id == eos_ || id == pad_; }

  const std::string &token(int id) const { return tokens_.at(id); }
  const std::vector<std::string> &tokens() const { return tokens_; }

  std::optional<int> find(std::string_view token) const {
    auto it = lookup_.find(std::string(token));
    if (it == lookup_.end())
      return std::nullopt;
    return it->second;
  }

  void save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw Error(ErrorCode::kIo, "cannot write vocab file " + path);
    for (const std::string &t: tokens_)
      out << t << '\n';
    if (!out)
      throw Error(ErrorCode::kIo, "failed writing vocab file " + path);
  }

  static Vocab load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw Error(ErrorCode::kIo, "cannot read vocab file " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r')
        line.pop_back();
      if (!line.empty())
        tokens.push_back(line);
    }
    try {
      return Vocab(std::move(tokens));
    } catch (const Error &e) {
      throw Error(ErrorCode::kIo, path + ": " + e.what());
    }
  }

  friend bool operator==(const Vocab &a, const Vocab &b) { return a.tokens_ == b.tokens_; }

private:
  int require(std::string_view special) const {
    auto id = find(special);
    if (!id)
      throw Error(ErrorCode::kInvalidArgument, "vocabulary lacks " + std::string(special));
    return *id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> lookup_;
  int bos_ = -1, eos_ = -1, pad_ = -1;
};

inline Expected<TokenSequence, TokenizeError> tokenize(std::string_view smiles,
                                                       const Vocab &vocab) {
  auto toks = split_tokens(smiles);
  if (!toks)
    return make_unexpected(toks.error());
  TokenSequence ids;
  ids.reserve(toks->size());
  std::size_t pos = 0;
  for (const std::string &t: *toks) {
    auto id = vocab.find(t);
    if (!id || t.front() == '<')
      return make_unexpected(TokenizeError { TokenizeErrorKind::kUnknownToken, pos, t });
    ids.push_back(*id);
    pos += t.size();
  }
  return ids;
}

inline std::string detokenize(const TokenSequence &ids, const Vocab &vocab) {
  std::string out;
  for (int id: ids)
    if (!vocab.is_special(id))
      out += vocab.token(id);
  return out;
}

}  // namespace chemlm
