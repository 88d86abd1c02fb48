//
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chemlm/core/expected.hpp"
#include "chemlm/mol/element.hpp"
#include "chemlm/mol/molgraph.hpp"

namespace chemlm {

enum class ParseErrorKind {
  kEmptyInput,
  kUnknownToken,
  kUnclosedRing,
  kUnbalancedParen,
  kMultiFragmentDisallowed,
  kSyntax,       // misplaced bond symbol, empty branch, ...
  kInvalidBond,  // self loop, duplicate bond, conflicting ring bond
  kInvalidAtom,  // charge out of range, malformed bracket contents
};

constexpr std::string_view parse_error_name(ParseErrorKind kind) {
  switch (kind) {
  case ParseErrorKind::kEmptyInput:
    return "EmptyInput";
  case ParseErrorKind::kUnknownToken:
    return "UnknownToken";
  case ParseErrorKind::kUnclosedRing:
    return "UnclosedRing";
  case ParseErrorKind::kUnbalancedParen:
    return "UnbalancedParen";
  case ParseErrorKind::kMultiFragmentDisallowed:
    return "MultiFragmentDisallowed";
  case ParseErrorKind::kSyntax:
    return "Syntax";
  case ParseErrorKind::kInvalidBond:
    return "InvalidBond";
  case ParseErrorKind::kInvalidAtom:
    return "InvalidAtom";
  }
  return "Unknown";
}

struct ParseError {
  ParseErrorKind kind;
  std::size_t position;  // first offending character
  std::string message;
};

inline std::string to_string(const ParseError &err) {
  return std::string(parse_error_name(err.kind)) + " at position "
         + std::to_string(err.position) + ": " + err.message;
}

struct ParseOptions {
  bool allow_multi_fragment = false;
};

struct ParsedSmiles {
  MolGraph mol;
  AtomSpanMap span_map;  // aligned to the input text
};

namespace internal {

class SmilesParser {
public:
  SmilesParser(std::string_view text, ParseOptions opts)
      : text_(text), opts_(opts) { }

  Expected<ParsedSmiles, ParseError> run();

private:
  struct PendingBond {
    char symbol = 0;
    std::size_t pos = 0;
  };

  struct OpenRing {
    bool open = false;
    int atom = -1;
    char symbol = 0;
    std::size_t pos = 0;
    std::size_t slot = 0;  // index into the opening atom's neighbor slots
  };

  struct BranchFrame {
    int atom;
    std::size_t pos;
  };

  Unexpected<ParseError> fail(ParseErrorKind kind, std::size_t pos,
                              std::string msg) const {
    return make_unexpected(ParseError { kind, pos, std::move(msg) });
  }

  std::optional<Unexpected<ParseError>> parse_organic(std::size_t &i);
  std::optional<Unexpected<ParseError>> parse_bracket(std::size_t &i);
  std::optional<Unexpected<ParseError>> attach_atom(Atom atom,
                                                    std::size_t begin,
                                                    std::size_t end);
  std::optional<Unexpected<ParseError>> ring_closure(int number,
                                                     std::size_t pos);

  static bool bond_symbol(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/'
           || c == '\\';
  }

  std::string_view text_;
  ParseOptions opts_;
  MolGraph mol_;
  AtomSpanMap map_;
  std::vector<std::vector<int>> slots_;
  int prev_ = -1;
  PendingBond pending_;
  bool branch_open_ = false;  // just after '(' with nothing inside yet
  std::vector<BranchFrame> branches_;
  std::array<OpenRing, 100> rings_ {};
};

inline std::optional<Unexpected<ParseError>>
SmilesParser::attach_atom(Atom atom, std::size_t begin, std::size_t end) {
  bool chiral = atom.chirality != Chirality::kNone;
  bool bracket_h = atom.explicit_h.value_or(0) > 0;
  int idx = mol_.add_atom(std::move(atom));
  slots_.emplace_back();
  for (std::size_t k = begin; k < end; ++k)
    map_.atom_at[k] = idx;

  if (prev_ >= 0) {
    const Atom &pa = mol_.atom(prev_);
    const Atom &na = mol_.atom(idx);
    BondOrder order = pa.aromatic && na.aromatic ? BondOrder::kAromatic
                                                 : BondOrder::kSingle;
    BondDirection dir = BondDirection::kNone;
    switch (pending_.symbol) {
    case 0:
      break;
    case '-':
      order = BondOrder::kSingle;
      break;
    case '=':
      order = BondOrder::kDouble;
      break;
    case '#':
      order = BondOrder::kTriple;
      break;
    case ':':
      if (!pa.aromatic || !na.aromatic)
        return fail(ParseErrorKind::kInvalidBond, pending_.pos,
                    "aromatic bond between non-aromatic atoms");
      order = BondOrder::kAromatic;
      break;
    case '/':
      order = BondOrder::kSingle;
      dir = BondDirection::kUp;
      break;
    case '\\':
      order = BondOrder::kSingle;
      dir = BondDirection::kDown;
      break;
    }
    mol_.add_bond(prev_, idx, order, dir);
    slots_[prev_].push_back(idx);
    slots_[idx].push_back(prev_);
  } else if (pending_.symbol != 0) {
    return fail(ParseErrorKind::kSyntax, pending_.pos,
                "bond symbol without a preceding atom");
  }
  if (chiral && bracket_h)
    slots_[idx].push_back(kStereoHydrogen);

  pending_ = {};
  branch_open_ = false;
  prev_ = idx;
  return std::nullopt;
}

inline std::optional<Unexpected<ParseError>>
SmilesParser::parse_organic(std::size_t &i) {
  std::size_t begin = i;
  char c = text_[i];
  Atom atom;
  auto next_is = [&](char n) {
    return i + 1 < text_.size() && text_[i + 1] == n;
  };
  switch (c) {
  case 'B':
    if (next_is('r')) {
      atom.element = elem::kBr;
      ++i;
    } else {
      atom.element = elem::kB;
    }
    break;
  case 'C':
    if (next_is('l')) {
      atom.element = elem::kCl;
      ++i;
    } else {
      atom.element = elem::kC;
    }
    break;
  case 'N':
    atom.element = elem::kN;
    break;
  case 'O':
    atom.element = elem::kO;
    break;
  case 'P':
    atom.element = elem::kP;
    break;
  case 'S':
    atom.element = elem::kS;
    break;
  case 'F':
    atom.element = elem::kF;
    break;
  case 'I':
    atom.element = elem::kI;
    break;
  case 'b':
    atom.element = elem::kB;
    atom.aromatic = true;
    break;
  case 'c':
    atom.element = elem::kC;
    atom.aromatic = true;
    break;
  case 'n':
    atom.element = elem::kN;
    atom.aromatic = true;
    break;
  case 'o':
    atom.element = elem::kO;
    atom.aromatic = true;
    break;
  case 'p':
    atom.element = elem::kP;
    atom.aromatic = true;
    break;
  case 's':
    atom.element = elem::kS;
    atom.aromatic = true;
    break;
  default:
    return fail(ParseErrorKind::kUnknownToken, i,
                std::string("unknown symbol '") + c + "'");
  }
  ++i;
  return attach_atom(std::move(atom), begin, i);
}

inline std::optional<Unexpected<ParseError>>
SmilesParser::parse_bracket(std::size_t &i) {
  const std::size_t begin = i;
  std::size_t close = text_.find(']', i);
  if (close == std::string_view::npos)
    return fail(ParseErrorKind::kUnknownToken, begin,
                "unterminated bracket atom");
  std::string_view body = text_.substr(i + 1, close - i - 1);
  std::size_t k = 0;
  auto at = [&](std::size_t j) -> char {
    return j < body.size() ? body[j] : '\0';
  };
  auto pos_of = [&](std::size_t j) { return begin + 1 + j; };

  Atom atom;
  atom.explicit_h = 0;

  if (std::isdigit(static_cast<unsigned char>(at(k)))) {
    int iso = 0;
    while (std::isdigit(static_cast<unsigned char>(at(k)))) {
      iso = iso * 10 + (at(k) - '0');
      if (iso > 999)
        return fail(ParseErrorKind::kInvalidAtom, pos_of(k),
                    "isotope out of range");
      ++k;
    }
    atom.isotope = iso;
  }

  // Element symbol: aromatic two-letter forms, aromatic one-letter forms,
  // then the periodic table (two letters preferred).
  std::size_t sym_pos = k;
  char c0 = at(k), c1 = at(k + 1);
  if (std::islower(static_cast<unsigned char>(c0))) {
    std::string_view two = body.substr(k, 2);
    if (two == "se" || two == "as" || two == "te") {
      atom.element = two == "se"   ? elem::kSe
                     : two == "as" ? elem::kAs
                                   : elem::kTe;
      k += 2;
    } else {
      switch (c0) {
      case 'b':
        atom.element = elem::kB;
        break;
      case 'c':
        atom.element = elem::kC;
        break;
      case 'n':
        atom.element = elem::kN;
        break;
      case 'o':
        atom.element = elem::kO;
        break;
      case 'p':
        atom.element = elem::kP;
        break;
      case 's':
        atom.element = elem::kS;
        break;
      default:
        return fail(ParseErrorKind::kUnknownToken, pos_of(k),
                    "unknown aromatic symbol");
      }
      ++k;
    }
    atom.aromatic = true;
  } else if (std::isupper(static_cast<unsigned char>(c0))) {
    int z = 0;
    if (std::islower(static_cast<unsigned char>(c1)))
      z = atomic_number(body.substr(k, 2));
    if (z != 0) {
      k += 2;
    } else {
      z = atomic_number(body.substr(k, 1));
      if (z == 0)
        return fail(ParseErrorKind::kUnknownToken, pos_of(k),
                    "unknown element");
      ++k;
    }
    atom.element = z;
  } else {
    return fail(ParseErrorKind::kUnknownToken, pos_of(sym_pos),
                "missing element symbol");
  }

  if (at(k) == '@') {
    if (at(k + 1) == '@') {
      atom.chirality = Chirality::kClockwise;
      k += 2;
    } else {
      atom.chirality = Chirality::kCounterClockwise;
      k += 1;
    }
    std::string_view cls = body.substr(k, 2);
    if (cls == "TH" || cls == "AL" || cls == "SP" || cls == "TB"
        || cls == "OH")
      return fail(ParseErrorKind::kUnknownToken, pos_of(k),
                  "unsupported chirality class");
  }

  if (at(k) == 'H') {
    ++k;
    int h = 1;
    if (std::isdigit(static_cast<unsigned char>(at(k)))) {
      h = at(k) - '0';
      ++k;
    }
    atom.explicit_h = h;
  }

  if (at(k) == '+' || at(k) == '-') {
    char sign = at(k);
    std::size_t charge_pos = k;
    int mag = 1;
    ++k;
    if (std::isdigit(static_cast<unsigned char>(at(k)))) {
      mag = at(k) - '0';
      ++k;
    } else {
      while (at(k) == sign) {
        ++mag;
        ++k;
      }
    }
    if (mag > 4)
      return fail(ParseErrorKind::kInvalidAtom, pos_of(charge_pos),
                  "formal charge out of range");
    atom.formal_charge = sign == '+' ? mag : -mag;
  }

  if (at(k) == ':') {
    ++k;
    if (!std::isdigit(static_cast<unsigned char>(at(k))))
      return fail(ParseErrorKind::kInvalidAtom, pos_of(k),
                  "malformed atom class");
    while (std::isdigit(static_cast<unsigned char>(at(k))))
      ++k;
  }

  if (k != body.size())
    return fail(ParseErrorKind::kInvalidAtom, pos_of(k),
                "unexpected character in bracket atom");

  i = close + 1;
  return attach_atom(std::move(atom), begin, i);
}

inline std::optional<Unexpected<ParseError>>
SmilesParser::ring_closure(int number, std::size_t pos) {
  if (prev_ < 0)
    return fail(ParseErrorKind::kSyntax, pos,
                "ring closure without a preceding atom");
  OpenRing &ring = rings_[number];
  if (!ring.open) {
    ring.open = true;
    ring.atom = prev_;
    ring.symbol = pending_.symbol;
    ring.pos = pos;
    ring.slot = slots_[prev_].size();
    slots_[prev_].push_back(-2);
    pending_ = {};
    return std::nullopt;
  }

  int a = ring.atom, b = prev_;
  char sym_a = ring.symbol, sym_b = pending_.symbol;
  // '/' at the opening digit reads from the opening atom; at the closing
  // digit it reads from the closing atom.
  bool from_open = sym_a != 0;
  char sym = from_open ? sym_a : sym_b;
  if (sym_a != 0 && sym_b != 0 && sym_a != sym_b) {
    bool dirs = (sym_a == '/' || sym_a == '\\') && (sym_b == '/' || sym_b == '\\');
    if (!dirs)
      return fail(ParseErrorKind::kInvalidBond, pending_.pos,
                  "conflicting ring-closure bond symbols");
  }
  const Atom &aa = mol_.atom(a), &ab = mol_.atom(b);
  BondOrder order = aa.aromatic && ab.aromatic ? BondOrder::kAromatic
                                               : BondOrder::kSingle;
  BondDirection dir = BondDirection::kNone;
  switch (sym) {
  case 0:
    break;
  case '-':
    order = BondOrder::kSingle;
    break;
  case '=':
    order = BondOrder::kDouble;
    break;
  case '#':
    order = BondOrder::kTriple;
    break;
  case ':':
    if (!aa.aromatic || !ab.aromatic)
      return fail(ParseErrorKind::kInvalidBond,
                  from_open ? ring.pos : pending_.pos,
                  "aromatic bond between non-aromatic atoms");
    order = BondOrder::kAromatic;
    break;
  case '/':
  case '\\':
    order = BondOrder::kSingle;
    dir = sym == '/' ? BondDirection::kUp : BondDirection::kDown;
    break;
  }
  int begin_atom = from_open ? a : b;
  int end_atom = from_open ? b : a;
  if (a == b)
    return fail(ParseErrorKind::kInvalidBond, pos, "ring closure to itself");
  if (mol_.add_bond(begin_atom, end_atom, order, dir) < 0)
    return fail(ParseErrorKind::kInvalidBond, pos,
                "duplicate bond via ring closure");
  slots_[a][ring.slot] = b;
  slots_[b].push_back(a);
  ring = {};
  pending_ = {};
  return std::nullopt;
}

inline Expected<ParsedSmiles, ParseError> SmilesParser::run() {
  if (text_.empty())
    return fail(ParseErrorKind::kEmptyInput, 0, "empty input");
  map_.atom_at.assign(text_.size(), AtomSpanMap::kNoAtom);

  std::size_t i = 0;
  while (i < text_.size()) {
    char c = text_[i];
    if (c == '[') {
      if (auto err = parse_bracket(i))
        return *err;
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      if (auto err = parse_organic(i))
        return *err;
    } else if (bond_symbol(c)) {
      if (prev_ < 0 || pending_.symbol != 0)
        return fail(ParseErrorKind::kSyntax, i, "misplaced bond symbol");
      pending_ = { c, i };
      branch_open_ = false;
      ++i;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      if (branch_open_)
        return fail(ParseErrorKind::kSyntax, i, "ring closure opens a branch");
      if (auto err = ring_closure(c - '0', i))
        return *err;
      ++i;
    } else if (c == '%') {
      if (i + 2 >= text_.size()
          || !std::isdigit(static_cast<unsigned char>(text_[i + 1]))
          || !std::isdigit(static_cast<unsigned char>(text_[i + 2])))
        return fail(ParseErrorKind::kUnknownToken, i,
                    "'%' must be followed by two digits");
      if (branch_open_)
        return fail(ParseErrorKind::kSyntax, i, "ring closure opens a branch");
      int number = (text_[i + 1] - '0') * 10 + (text_[i + 2] - '0');
      if (auto err = ring_closure(number, i))
        return *err;
      i += 3;
    } else if (c == '(') {
      if (prev_ < 0 || pending_.symbol != 0 || branch_open_)
        return fail(ParseErrorKind::kSyntax, i, "misplaced '('");
      branches_.push_back({ prev_, i });
      branch_open_ = true;
      ++i;
    } else if (c == ')') {
      if (branches_.empty())
        return fail(ParseErrorKind::kUnbalancedParen, i, "unmatched ')'");
      if (pending_.symbol != 0)
        return fail(ParseErrorKind::kSyntax, pending_.pos,
                    "bond symbol without a following atom");
      if (branch_open_)
        return fail(ParseErrorKind::kSyntax, i, "empty branch");
      prev_ = branches_.back().atom;
      branches_.pop_back();
      ++i;
    } else if (c == '.') {
      if (!opts_.allow_multi_fragment)
        return fail(ParseErrorKind::kMultiFragmentDisallowed, i,
                    "multi-fragment input disallowed");
      if (prev_ < 0 || pending_.symbol != 0 || !branches_.empty())
        return fail(ParseErrorKind::kSyntax, i, "misplaced '.'");
      prev_ = -1;
      ++i;
    } else {
      return fail(ParseErrorKind::kUnknownToken, i,
                  std::string("unknown character '") + c + "'");
    }
  }

  if (!branches_.empty())
    return fail(ParseErrorKind::kUnbalancedParen, branches_.front().pos,
                "unclosed '('");
  if (pending_.symbol != 0)
    return fail(ParseErrorKind::kSyntax, pending_.pos,
                "bond symbol without a following atom");
  std::optional<std::size_t> first_open;
  for (const OpenRing &r: rings_)
    if (r.open && (!first_open || r.pos < *first_open))
      first_open = r.pos;
  if (first_open)
    return fail(ParseErrorKind::kUnclosedRing, *first_open,
                "ring bond never closed");

  for (int a = 0; a < mol_.num_atoms(); ++a) {
    Atom &atom = mol_.atom(a);
    if (atom.chirality != Chirality::kNone)
      atom.stereo_order = slots_[a];
  }
  return ParsedSmiles { std::move(mol_), std::move(map_) };
}

}  // namespace internal

// Parses SMILES text and returns the graph plus the character-to-atom map
// of the input string.
inline Expected<ParsedSmiles, ParseError>
parse_smiles_mapped(std::string_view text, ParseOptions opts = {}) {
  return internal::SmilesParser(text, opts).run();
}

inline Expected<MolGraph, ParseError> parse_smiles(std::string_view text,
                                                   ParseOptions opts = {}) {
  auto parsed = parse_smiles_mapped(text, opts);
  if (!parsed)
    return make_unexpected(parsed.error());
  return std::move(parsed.value().mol);
}

}  // namespace chemlm
