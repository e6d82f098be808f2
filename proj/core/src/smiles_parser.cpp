// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cctype>
#include <map>
#include <set>

#include <fmt/format.h>

#include "molrefine/element.hpp"
#include "molrefine/smiles.hpp"

namespace molrefine {
namespace {

constexpr int kMaxCharge = 15;

struct PendingRing {
  int atom;
  std::optional<BondOrder> order;
  std::size_t position;
};

struct Branch {
  int atom;
  std::size_t position;
};

class Parser {
 public:
  Parser(std::string_view text, const ParseOptions& options) : text_(text), options_(options) {}

  ParseOutcome run() {
    std::size_t begin = 0;
    std::size_t end = text_.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text_[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text_[end - 1]))) --end;
    if (begin == end) return fail(ParseErrorCategory::kSyntax, "empty SMILES", std::nullopt);
    pos_ = begin;
    end_ = end;
    if (auto err = scan()) return {*err};
    finish();
    for (auto c : kAllParseErrorCategories) {
      if (auto it = first_.find(c); it != first_.end()) return {it->second};
    }
    return build();
  }

 private:
  static ParseOutcome fail(ParseErrorCategory c, std::string detail, std::optional<std::size_t> pos) {
    return {ParseError{c, std::move(detail), pos}};
  }

  static ParseError syntax(std::string detail, std::size_t pos) {
    return ParseError{ParseErrorCategory::kSyntax, std::move(detail), pos};
  }

  void record(ParseErrorCategory c, std::string detail, std::optional<std::size_t> pos) {
    first_.try_emplace(c, ParseError{c, std::move(detail), pos});
  }

  char peek(std::size_t ahead = 0) const { return pos_ + ahead < end_ ? text_[pos_ + ahead] : '\0'; }

  std::optional<ParseError> scan() {
    while (pos_ < end_) {
      const char c = text_[pos_];
      const std::size_t at = pos_;
      if (c == '(') {
        if (pending_bond_) return syntax(fmt::format("bond '{}' must be followed by an atom", pending_bond_char_), pending_bond_pos_);
        if (prev_ < 0) {
          record(ParseErrorCategory::kParentheses, "branch opened with no preceding atom", at);
        } else if (after_open_) {
          record(ParseErrorCategory::kParentheses, "branch opened directly inside another branch", at);
        }
        branches_.push_back({prev_, at});
        after_open_ = true;
        ++pos_;
        continue;
      }
      if (c == ')') {
        if (pending_bond_) return syntax(fmt::format("bond '{}' must be followed by an atom", pending_bond_char_), pending_bond_pos_);
        if (branches_.empty()) {
          record(ParseErrorCategory::kParentheses, "unmatched ')'", at);
        } else {
          if (after_open_) record(ParseErrorCategory::kParentheses, "empty branch '()'", at);
          prev_ = branches_.back().atom;
          branches_.pop_back();
        }
        after_open_ = false;
        ++pos_;
        continue;
      }
      if (c == '.') {
        if (pending_bond_) return syntax(fmt::format("bond '{}' must be followed by an atom", pending_bond_char_), pending_bond_pos_);
        if (prev_ < 0 || after_open_) return syntax("'.' must follow an atom", at);
        if (pos_ + 1 >= end_) return syntax("'.' must be followed by an atom", at);
        prev_ = -1;
        ++pos_;
        continue;
      }
      if (is_bond_char(c)) {
        if (pending_bond_) return syntax(fmt::format("two consecutive bond symbols '{}{}'", pending_bond_char_, c), at);
        if (c == '$') return syntax("quadruple bond '$' is not supported", at);
        if (prev_ < 0 && !after_open_) return syntax(fmt::format("bond '{}' has no preceding atom", c), at);
        pending_bond_ = bond_from_char(c);
        pending_bond_char_ = c;
        pending_bond_pos_ = at;
        ++pos_;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (auto err = ring_closure()) return err;
        continue;
      }
      if (c == '[') {
        if (auto err = bracket_atom()) return err;
        continue;
      }
      if (auto err = organic_atom()) return err;
    }
    if (pending_bond_) return syntax(fmt::format("bond '{}' must be followed by an atom", pending_bond_char_), pending_bond_pos_);
    return std::nullopt;
  }

  static bool is_bond_char(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '/' || c == '\\' || c == '$';
  }

  static std::optional<BondOrder> bond_from_char(char c) {
    switch (c) {
      case '=': return BondOrder::kDouble;
      case '#': return BondOrder::kTriple;
      case ':': return BondOrder::kAromatic;
      default: return BondOrder::kSingle;
    }
  }

  std::optional<ParseError> ring_closure() {
    const std::size_t at = pos_;
    int number = 0;
    if (text_[pos_] == '%') {
      if (!std::isdigit(static_cast<unsigned char>(peek(1))) || !std::isdigit(static_cast<unsigned char>(peek(2)))) {
        return syntax("'%' must be followed by two digits", at);
      }
      number = (peek(1) - '0') * 10 + (peek(2) - '0');
      pos_ += 3;
    } else {
      number = text_[pos_] - '0';
      ++pos_;
    }
    if (prev_ < 0 || after_open_) return syntax(fmt::format("ring bond {} does not follow an atom", number), at);
    const auto order = pending_bond_;
    pending_bond_.reset();
    auto it = open_rings_.find(number);
    if (it == open_rings_.end()) {
      open_rings_.emplace(number, PendingRing{prev_, order, at});
      return std::nullopt;
    }
    const PendingRing ring = it->second;
    open_rings_.erase(it);
    if (order && ring.order && *order != *ring.order) {
      return syntax(fmt::format("ring bond {} has conflicting bond symbols", number), at);
    }
    if (ring.atom == prev_) {
      record(ParseErrorCategory::kDuplicateBond, fmt::format("ring bond {} closes on its own atom", number), at);
      return std::nullopt;
    }
    add_bond(ring.atom, prev_, order ? order : ring.order, at, number);
    return std::nullopt;
  }

  void add_bond(int a, int b, std::optional<BondOrder> order, std::size_t at, int ring_number) {
    const auto key = std::minmax(a, b);
    if (!pairs_.insert(key).second) {
      const auto detail = ring_number >= 0
                              ? fmt::format("ring bond {} duplicates an existing bond between atoms {} and {}", ring_number,
                                            key.first, key.second)
                              : fmt::format("bond between atoms {} and {} defined twice", key.first, key.second);
      record(ParseErrorCategory::kDuplicateBond, detail, at);
      return;
    }
    BondOrder resolved = BondOrder::kSingle;
    if (order) {
      resolved = *order;
    } else if (atoms_[static_cast<std::size_t>(a)].aromatic_flag && atoms_[static_cast<std::size_t>(b)].aromatic_flag) {
      resolved = BondOrder::kAromatic;
    }
    bonds_.push_back({a, b, resolved});
  }

  void attach(Atom atom, std::size_t at) {
    const int index = static_cast<int>(atoms_.size());
    atoms_.push_back(atom);
    positions_.push_back(at);
    if (prev_ >= 0) add_bond(prev_, index, pending_bond_, at, -1);
    pending_bond_.reset();
    prev_ = index;
    after_open_ = false;
  }

  std::optional<ParseError> organic_atom() {
    const std::size_t at = pos_;
    const char c = text_[pos_];
    Atom atom;
    auto two = std::string_view(text_).substr(pos_, std::min<std::size_t>(2, end_ - pos_));
    if (two.size() == 2 && std::isupper(static_cast<unsigned char>(two[0])) && std::islower(static_cast<unsigned char>(two[1])) &&
        std::string_view("bcnops").find(two[1]) == std::string_view::npos && two != "Cl" && two != "Br" &&
        element_from_symbol(two)) {
      return syntax(fmt::format("element '{}' must be written in brackets", two), at);
    }
    if (two == "Cl" || two == "Br") {
      atom.element = two == "Cl" ? 17 : 35;
      pos_ += 2;
      attach(atom, at);
      return std::nullopt;
    }
    static constexpr std::array<std::pair<char, int>, 16> kOrganic{{{'B', 5},
                                                                     {'C', 6},
                                                                     {'N', 7},
                                                                     {'O', 8},
                                                                     {'P', 15},
                                                                     {'S', 16},
                                                                     {'F', 9},
                                                                     {'I', 53},
                                                                     {'b', 5},
                                                                     {'c', 6},
                                                                     {'n', 7},
                                                                     {'o', 8},
                                                                     {'p', 15},
                                                                     {'s', 16},
                                                                     {'\0', 0},
                                                                     {'\0', 0}}};
    for (const auto& [symbol, z] : kOrganic) {
      if (symbol != '\0' && symbol == c) {
        atom.element = z;
        atom.aromatic_flag = std::islower(static_cast<unsigned char>(c)) != 0;
        ++pos_;
        attach(atom, at);
        return std::nullopt;
      }
    }
    if (c == '*') return syntax("wildcard atom '*' is not supported", at);
    if (std::isupper(static_cast<unsigned char>(c))) {
      std::string symbol(1, c);
      if (std::islower(static_cast<unsigned char>(peek(1))) && element_from_symbol(two)) symbol = std::string(two);
      if (element_from_symbol(symbol)) return syntax(fmt::format("element '{}' must be written in brackets", symbol), at);
      return syntax(fmt::format("unknown element symbol '{}'", symbol), at);
    }
    if (std::isprint(static_cast<unsigned char>(c))) return syntax(fmt::format("unexpected character '{}'", c), at);
    return syntax(fmt::format("unexpected byte 0x{:02x}", static_cast<unsigned char>(c)), at);
  }

  std::optional<int> read_number(std::size_t max_digits) {
    if (!std::isdigit(static_cast<unsigned char>(peek()))) return std::nullopt;
    int value = 0;
    std::size_t digits = 0;
    while (std::isdigit(static_cast<unsigned char>(peek())) && digits < max_digits) {
      value = value * 10 + (peek() - '0');
      ++pos_;
      ++digits;
    }
    return value;
  }

  std::optional<ParseError> bracket_atom() {
    const std::size_t at = pos_;
    const auto close = text_.find(']', pos_);
    if (close == std::string_view::npos || close >= end_) return syntax("'[' without matching ']'", at);
    const auto inner_end = close;
    ++pos_;
    Atom atom;
    atom.bracketed = true;
    atom.explicit_h = 0;

    if (auto iso = read_number(4)) {
      if (std::isdigit(static_cast<unsigned char>(peek()))) return syntax("isotope has too many digits", at);
      atom.isotope = *iso;
    }

    // Element symbol: aromatic two-letter forms, then two-letter elements, then one letter.
    const char c = peek();
    if (c == '\0' || pos_ >= inner_end) return syntax("bracket atom without element symbol", at);
    const auto rest = text_.substr(pos_, inner_end - pos_);
    bool matched = false;
    for (const auto& [sym, z] : {std::pair<std::string_view, int>{"se", 34}, {"as", 33}, {"te", 52}}) {
      if (rest.starts_with(sym)) {
        atom.element = z;
        atom.aromatic_flag = true;
        pos_ += 2;
        matched = true;
        break;
      }
    }
    if (!matched && std::isupper(static_cast<unsigned char>(c))) {
      if (rest.size() >= 2 && std::islower(static_cast<unsigned char>(rest[1]))) {
        if (auto z = element_from_symbol(rest.substr(0, 2))) {
          atom.element = *z;
          pos_ += 2;
          matched = true;
        }
      }
      if (!matched) {
        if (auto z = element_from_symbol(rest.substr(0, 1))) {
          atom.element = *z;
          ++pos_;
          matched = true;
        }
      }
      if (!matched) return syntax(fmt::format("unknown element symbol in '{}'", text_.substr(at, close - at + 1)), at);
    } else if (!matched) {
      static constexpr std::pair<char, int> kAromatic[] = {{'b', 5}, {'c', 6}, {'n', 7}, {'o', 8}, {'p', 15}, {'s', 16}};
      for (const auto& [sym, z] : kAromatic) {
        if (c == sym) {
          atom.element = z;
          atom.aromatic_flag = true;
          ++pos_;
          matched = true;
          break;
        }
      }
      if (!matched) return syntax(fmt::format("unknown element symbol in '{}'", text_.substr(at, close - at + 1)), at);
    }

    // Chirality is read and dropped.
    if (peek() == '@') {
      ++pos_;
      if (peek() == '@') {
        ++pos_;
      } else {
        const auto tail = text_.substr(pos_, inner_end - pos_);
        for (std::string_view cls : {"TH", "AL", "SP", "TB", "OH"}) {
          if (tail.starts_with(cls)) {
            pos_ += 2;
            if (!read_number(2)) return syntax("chirality class without number", at);
            break;
          }
        }
      }
    }
    if (peek() == 'H' && pos_ < inner_end) {
      ++pos_;
      atom.explicit_h = read_number(1).value_or(1);
    }
    if (peek() == '+' || peek() == '-') {
      const char sign = peek();
      ++pos_;
      int magnitude = 1;
      if (auto digits = read_number(2)) {
        magnitude = *digits;
      } else {
        while (peek() == sign && pos_ < inner_end) {
          ++magnitude;
          ++pos_;
        }
      }
      if (magnitude > kMaxCharge) return syntax(fmt::format("charge {}{} out of range", sign, magnitude), at);
      atom.formal_charge = sign == '+' ? magnitude : -magnitude;
    }
    if (peek() == ':' && pos_ < inner_end) {
      ++pos_;
      if (!read_number(8)) return syntax("atom class without number", at);
    }
    if (pos_ != inner_end) {
      return syntax(fmt::format("unexpected '{}' inside bracket atom", text_[pos_]), pos_);
    }
    pos_ = close + 1;
    attach(atom, at);
    return std::nullopt;
  }

  void finish() {
    if (!branches_.empty()) record(ParseErrorCategory::kParentheses, "unmatched '('", branches_.front().position);
    if (!open_rings_.empty()) {
      const PendingRing* first = nullptr;
      int number = 0;
      for (const auto& [n, ring] : open_rings_) {
        if (!first || ring.position < first->position) {
          first = &ring;
          number = n;
        }
      }
      record(ParseErrorCategory::kUnclosedRing, fmt::format("ring bond {} opened but never closed", number), first->position);
    }
  }

  // Neutral [H] atoms with a single bond to a heavy atom become hydrogen counts.
  ParseOutcome build() {
    const auto n = atoms_.size();
    std::vector<int> degree(n, 0);
    for (const auto& b : bonds_) {
      ++degree[static_cast<std::size_t>(b.begin)];
      ++degree[static_cast<std::size_t>(b.end)];
    }
    std::vector<bool> drop(n, false);
    std::vector<int> folded(n, 0);
    if (!options_.fragment) {
      for (const auto& b : bonds_) {
        if (b.order != BondOrder::kSingle) continue;
        for (int side = 0; side < 2; ++side) {
          const int h = side == 0 ? b.begin : b.end;
          const int heavy = b.other(h);
          const auto& ha = atoms_[static_cast<std::size_t>(h)];
          const auto& hv = atoms_[static_cast<std::size_t>(heavy)];
          if (ha.element != 1 || !ha.bracketed || ha.formal_charge != 0 || ha.isotope || ha.explicit_h.value_or(0) != 0) continue;
          if (degree[static_cast<std::size_t>(h)] != 1 || hv.element == 1) continue;
          drop[static_cast<std::size_t>(h)] = true;
        }
      }
    }
    std::vector<int> remap(n, -1);
    std::vector<Atom> atoms;
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < n; ++i) {
      if (drop[i]) continue;
      remap[i] = static_cast<int>(atoms.size());
      atoms.push_back(atoms_[i]);
      positions.push_back(positions_[i]);
    }
    folded.assign(atoms.size(), 0);
    std::vector<Bond> bonds;
    for (const auto& b : bonds_) {
      const bool db = drop[static_cast<std::size_t>(b.begin)];
      const bool de = drop[static_cast<std::size_t>(b.end)];
      if (db || de) {
        const int heavy = remap[static_cast<std::size_t>(db ? b.end : b.begin)];
        auto& atom = atoms[static_cast<std::size_t>(heavy)];
        if (atom.bracketed) {
          atom.explicit_h = atom.explicit_h.value_or(0) + 1;
        } else {
          ++folded[static_cast<std::size_t>(heavy)];
        }
        continue;
      }
      bonds.push_back({remap[static_cast<std::size_t>(b.begin)], remap[static_cast<std::size_t>(b.end)], b.order});
    }
    auto built = MolGraph::build(std::move(atoms), std::move(bonds),
                                 {.atom_positions = positions, .folded_h = folded, .validate = !options_.fragment});
    if (auto* err = std::get_if<ParseError>(&built)) return {std::move(*err)};
    return {std::move(std::get<MolGraph>(built))};
  }

  std::string_view text_;
  ParseOptions options_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;

  std::vector<Atom> atoms_;
  std::vector<std::size_t> positions_;
  std::vector<Bond> bonds_;
  std::set<std::pair<int, int>> pairs_;
  std::map<int, PendingRing> open_rings_;
  std::vector<Branch> branches_;
  std::map<ParseErrorCategory, ParseError> first_;

  int prev_ = -1;
  bool after_open_ = false;
  std::optional<BondOrder> pending_bond_;
  char pending_bond_char_ = 0;
  std::size_t pending_bond_pos_ = 0;
};

}  // namespace

ParseOutcome parse_smiles(std::string_view text, const ParseOptions& options) {
  return Parser(text, options).run();
}

}  // namespace molrefine
