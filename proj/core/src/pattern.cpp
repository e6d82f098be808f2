// SPDX-License-Identifier: Apache-2.0
#include "molrefine/pattern.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

#include "molrefine/element.hpp"

namespace molrefine {
namespace {

enum Prim : int {
  kAtomicNum,
  kAromatic,
  kTotalH,
  kDegree,
  kConnectivity,
  kValence,
  kCharge,
  kRingCount,
  kRingSize,
  kIsotope,
  kRecursive,
  kBondOrder,
  kBondRing,
};

using Expr = Pattern::Expr;

Expr prim(int p, int value) { return Expr{Expr::Op::kPrim, p, value, {}}; }

Expr combine(Expr::Op op, Expr a, Expr b) {
  if (a.op == op) {
    a.kids.push_back(std::move(b));
    return a;
  }
  return Expr{op, 0, 0, {std::move(a), std::move(b)}};
}

Expr negate(Expr e) { return Expr{Expr::Op::kNot, 0, 0, {std::move(e)}}; }

Expr element_expr(int z, bool aromatic) { return combine(Expr::Op::kAnd, prim(kAtomicNum, z), prim(kAromatic, aromatic ? 1 : 0)); }

Expr default_bond() { return combine(Expr::Op::kOr, prim(kBondOrder, 1), prim(kBondOrder, 4)); }

}  // namespace

class PatternParser {
 public:
  explicit PatternParser(std::string_view text) : text_(text) {}

  Pattern run() {
    Pattern p;
    p.source_ = std::string(text_);
    int prev = -1;
    std::vector<int> branches;
    std::optional<Expr> bond;
    std::map<int, std::pair<int, std::optional<Expr>>> rings;
    while (pos_ < text_.size()) {
      const char c = text_[pos_];
      if (c == '(') {
        if (prev < 0) fail("branch without preceding atom");
        branches.push_back(prev);
        ++pos_;
      } else if (c == ')') {
        if (branches.empty()) fail("unmatched ')'");
        prev = branches.back();
        branches.pop_back();
        ++pos_;
      } else if (c == '.') {
        prev = -1;
        ++pos_;
      } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '%') {
        if (prev < 0) fail("ring closure without atom");
        int number = 0;
        if (c == '%') {
          if (pos_ + 2 >= text_.size()) fail("bad ring number");
          number = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
          pos_ += 3;
        } else {
          number = c - '0';
          ++pos_;
        }
        if (auto it = rings.find(number); it != rings.end()) {
          auto expr = bond ? std::move(*bond) : (it->second.second ? std::move(*it->second.second) : default_bond());
          p.bonds_.push_back({it->second.first, prev, std::move(expr)});
          rings.erase(it);
        } else {
          rings.emplace(number, std::make_pair(prev, std::move(bond)));
        }
        bond.reset();
      } else if (is_bond_start(c)) {
        bond = parse_bond();
      } else {
        const int index = static_cast<int>(p.atoms_.size());
        p.atoms_.push_back(parse_atom(p));
        if (prev >= 0) p.bonds_.push_back({prev, index, bond ? std::move(*bond) : default_bond()});
        bond.reset();
        prev = index;
      }
    }
    if (!branches.empty() || !rings.empty() || bond) fail("unterminated pattern");
    if (p.atoms_.empty()) fail("empty pattern");
    p.finalize();
    return p;
  }

 private:
  [[noreturn]] void fail(std::string_view what) const {
    throw std::invalid_argument(fmt::format("pattern '{}': {} at {}", text_, what, pos_));
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }

  static bool is_bond_start(char c) {
    return c == '-' || c == '=' || c == '#' || c == ':' || c == '~' || c == '@' || c == '!' || c == '/' || c == '\\';
  }

  int read_int(int fallback) {
    if (!std::isdigit(static_cast<unsigned char>(peek()))) return fallback;
    int v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) v = v * 10 + (text_[pos_++] - '0');
    return v;
  }

  // Bond expressions share the operator grammar of bracket atoms.
  Expr parse_bond() {
    return parse_low([this] { return bond_primitive(); }, [](char c) { return is_bond_start(c); });
  }

  Expr bond_primitive() {
    const char c = text_[pos_++];
    switch (c) {
      case '-':
      case '/':
      case '\\': return prim(kBondOrder, 1);
      case '=': return prim(kBondOrder, 2);
      case '#': return prim(kBondOrder, 3);
      case ':': return prim(kBondOrder, 4);
      case '~': return Expr{};
      case '@': return prim(kBondRing, 1);
      default: fail("unsupported bond primitive");
    }
  }

  template <class Primitive, class StartsPrimitive>
  Expr parse_low(Primitive primitive, StartsPrimitive starts) {
    Expr e = parse_or(primitive, starts);
    while (peek() == ';') {
      ++pos_;
      e = combine(Expr::Op::kAnd, std::move(e), parse_or(primitive, starts));
    }
    return e;
  }

  template <class Primitive, class StartsPrimitive>
  Expr parse_or(Primitive primitive, StartsPrimitive starts) {
    Expr e = parse_and(primitive, starts);
    while (peek() == ',') {
      ++pos_;
      e = combine(Expr::Op::kOr, std::move(e), parse_and(primitive, starts));
    }
    return e;
  }

  template <class Primitive, class StartsPrimitive>
  Expr parse_and(Primitive primitive, StartsPrimitive starts) {
    Expr e = parse_unary(primitive, starts);
    while (true) {
      if (peek() == '&') {
        ++pos_;
      } else if (!starts(peek())) {
        break;
      }
      e = combine(Expr::Op::kAnd, std::move(e), parse_unary(primitive, starts));
    }
    return e;
  }

  template <class Primitive, class StartsPrimitive>
  Expr parse_unary(Primitive primitive, StartsPrimitive starts) {
    if (peek() == '!') {
      ++pos_;
      return negate(parse_unary(primitive, starts));
    }
    if (!starts(peek()) || peek() == '\0') fail("expected primitive");
    return primitive();
  }

  Expr parse_atom(Pattern& p) {
    const char c = peek();
    if (c == '[') {
      ++pos_;
      bracket_start_ = pos_;
      Expr e = parse_low([&] { return atom_primitive(p); },
                         [](char x) { return x != '\0' && x != ']' && x != ',' && x != ';' && x != '&'; });
      if (peek() != ']') fail("expected ']'");
      ++pos_;
      return e;
    }
    if (c == '*') {
      ++pos_;
      return Expr{};
    }
    if (c == 'a' || c == 'A') {
      ++pos_;
      return prim(kAromatic, c == 'a' ? 1 : 0);
    }
    const auto rest = text_.substr(pos_);
    if (rest.starts_with("Cl") || rest.starts_with("Br")) {
      pos_ += 2;
      return element_expr(rest[0] == 'C' ? 17 : 35, false);
    }
    static constexpr std::pair<char, int> kOrganic[] = {{'B', 5}, {'C', 6}, {'N', 7}, {'O', 8}, {'P', 15},
                                                        {'S', 16}, {'F', 9}, {'I', 53}, {'b', 5}, {'c', 6},
                                                        {'n', 7}, {'o', 8}, {'p', 15}, {'s', 16}};
    for (const auto& [sym, z] : kOrganic) {
      if (sym == c) {
        ++pos_;
        return element_expr(z, std::islower(static_cast<unsigned char>(c)) != 0);
      }
    }
    fail("unsupported atom");
  }

  Expr atom_primitive(Pattern& p) {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return prim(kIsotope, read_int(0));
    switch (c) {
      case '*': ++pos_; return Expr{};
      case 'a': ++pos_; return prim(kAromatic, 1);
      case 'A': ++pos_; return prim(kAromatic, 0);
      case '#': ++pos_; return prim(kAtomicNum, read_int(-1));
      case 'D': ++pos_; return prim(kDegree, read_int(1));
      case 'X': ++pos_; return prim(kConnectivity, read_int(1));
      case 'v': ++pos_; return prim(kValence, read_int(1));
      case 'R': ++pos_; return prim(kRingCount, read_int(-1));
      case 'r': ++pos_; return prim(kRingSize, read_int(-1));
      case '@':
        while (peek() == '@') ++pos_;
        return Expr{};
      case '+':
      case '-': {
        ++pos_;
        int magnitude = 1;
        if (std::isdigit(static_cast<unsigned char>(peek()))) {
          magnitude = read_int(1);
        } else {
          while (peek() == c) {
            ++magnitude;
            ++pos_;
          }
        }
        return prim(kCharge, c == '+' ? magnitude : -magnitude);
      }
      case '$': {
        if (pos_ + 1 >= text_.size() || text_[pos_ + 1] != '(') fail("expected '(' after '$'");
        std::size_t depth = 0;
        std::size_t i = pos_ + 1;
        for (; i < text_.size(); ++i) {
          if (text_[i] == '(') ++depth;
          if (text_[i] == ')' && --depth == 0) break;
        }
        if (i >= text_.size()) fail("unterminated recursive pattern");
        auto sub = std::make_shared<Pattern>(PatternParser(text_.substr(pos_ + 2, i - pos_ - 2)).run());
        p.recursive_.push_back(std::move(sub));
        pos_ = i + 1;
        return prim(kRecursive, static_cast<int>(p.recursive_.size() - 1));
      }
      default: break;
    }
    if (c == 'H') {
      // Leading H followed by a charge or the closing bracket is the element.
      const char next = pos_ + 1 < text_.size() ? text_[pos_ + 1] : '\0';
      if (start == bracket_start_ && (next == ']' || next == '+' || next == '-')) {
        ++pos_;
        return element_expr(1, false);
      }
      ++pos_;
      return prim(kTotalH, read_int(1));
    }
    const auto rest = text_.substr(pos_);
    for (const auto& [sym, z] : {std::pair<std::string_view, int>{"se", 34}, {"as", 33}, {"te", 52}}) {
      if (rest.starts_with(sym)) {
        pos_ += 2;
        return element_expr(z, true);
      }
    }
    if (std::isupper(static_cast<unsigned char>(c))) {
      if (rest.size() >= 2 && std::islower(static_cast<unsigned char>(rest[1]))) {
        if (auto z = element_from_symbol(rest.substr(0, 2))) {
          pos_ += 2;
          return element_expr(*z, false);
        }
      }
      if (auto z = element_from_symbol(rest.substr(0, 1))) {
        ++pos_;
        return element_expr(*z, false);
      }
    }
    static constexpr std::pair<char, int> kAromaticSymbols[] = {{'b', 5}, {'c', 6}, {'n', 7}, {'o', 8}, {'p', 15}, {'s', 16}};
    for (const auto& [sym, z] : kAromaticSymbols) {
      if (sym == c) {
        ++pos_;
        return element_expr(z, true);
      }
    }
    fail("unsupported atom primitive");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t bracket_start_ = 0;
};

class PatternMatcher {
 public:
  PatternMatcher(const Pattern& pattern, const MatchTarget& target)
      : p_(pattern), t_(target), map_(pattern.atoms_.size(), -1), used_(target.size(), false) {}

  // Calls `visit` for every embedding; stops early when it returns false.
  template <class Visit>
  void search(int root, Visit&& visit) {
    step(0, root, visit);
  }

 private:
  bool atom_ok(const Expr& e, int node) const {
    const auto& n = t_.node(node);
    switch (e.op) {
      case Expr::Op::kTrue: return true;
      case Expr::Op::kNot: return !atom_ok(e.kids[0], node);
      case Expr::Op::kAnd:
        return std::all_of(e.kids.begin(), e.kids.end(), [&](const Expr& k) { return atom_ok(k, node); });
      case Expr::Op::kOr:
        return std::any_of(e.kids.begin(), e.kids.end(), [&](const Expr& k) { return atom_ok(k, node); });
      case Expr::Op::kPrim: break;
    }
    switch (e.prim) {
      case kAtomicNum: return n.element == e.value;
      case kAromatic: return n.aromatic == (e.value != 0);
      case kTotalH: return n.total_h == e.value;
      case kDegree: return n.degree == e.value;
      case kConnectivity: return n.connectivity == e.value;
      case kValence: return n.valence == e.value;
      case kCharge: return n.charge == e.value;
      case kRingCount: return e.value < 0 ? n.ring_count > 0 : n.ring_count == e.value;
      case kRingSize: return e.value < 0 ? n.ring_count > 0 : n.smallest_ring == e.value;
      case kIsotope: return n.isotope == e.value;
      case kRecursive: return p_.recursive_[static_cast<std::size_t>(e.value)]->matches_at(t_, node);
      default: return false;
    }
  }

  static bool bond_ok(const Expr& e, const MatchTarget::Edge& edge) {
    switch (e.op) {
      case Expr::Op::kTrue: return true;
      case Expr::Op::kNot: return !bond_ok(e.kids[0], edge);
      case Expr::Op::kAnd:
        return std::all_of(e.kids.begin(), e.kids.end(), [&](const Expr& k) { return bond_ok(k, edge); });
      case Expr::Op::kOr:
        return std::any_of(e.kids.begin(), e.kids.end(), [&](const Expr& k) { return bond_ok(k, edge); });
      case Expr::Op::kPrim: break;
    }
    switch (e.prim) {
      case kBondOrder: return edge.order == e.value;
      case kBondRing: return edge.ring == (e.value != 0);
      default: return false;
    }
  }

  bool fits(std::size_t position, int atom, int node) const {
    if (used_[static_cast<std::size_t>(node)]) return false;
    if (!atom_ok(p_.atoms_[static_cast<std::size_t>(atom)], node)) return false;
    for (int b : p_.back_bonds_[position]) {
      const auto& bond = p_.bonds_[static_cast<std::size_t>(b)];
      const int other = bond.a == atom ? bond.b : bond.a;
      const auto* edge = t_.edge_between(node, map_[static_cast<std::size_t>(other)]);
      if (!edge || !bond_ok(bond.expr, *edge)) return false;
    }
    return true;
  }

  template <class Visit>
  bool step(std::size_t position, int root, Visit& visit) {
    if (position == p_.order_.size()) return visit(map_);
    const int atom = p_.order_[position];
    auto place = [&](int node) {
      if (!fits(position, atom, node)) return true;
      map_[static_cast<std::size_t>(atom)] = node;
      used_[static_cast<std::size_t>(node)] = true;
      const bool keep_going = step(position + 1, root, visit);
      used_[static_cast<std::size_t>(node)] = false;
      map_[static_cast<std::size_t>(atom)] = -1;
      return keep_going;
    };
    if (position == 0 && root >= 0) return place(root);
    if (!p_.back_bonds_[position].empty()) {
      // Extend along the first bond back into the placed part.
      const auto& bond = p_.bonds_[static_cast<std::size_t>(p_.back_bonds_[position].front())];
      const int anchor = map_[static_cast<std::size_t>(bond.a == atom ? bond.b : bond.a)];
      for (const auto& edge : t_.edges(anchor)) {
        if (!place(edge.to)) return false;
      }
      return true;
    }
    for (int node = 0; node < static_cast<int>(t_.size()); ++node) {
      if (!place(node)) return false;
    }
    return true;
  }

  const Pattern& p_;
  const MatchTarget& t_;
  std::vector<int> map_;
  std::vector<bool> used_;
};

MatchTarget::MatchTarget(const MolGraph& mol, bool explicit_hydrogens) {
  const int n = static_cast<int>(mol.atom_count());
  nodes_.resize(static_cast<std::size_t>(n));
  adjacency_.resize(static_cast<std::size_t>(n));
  for (int b = 0; b < static_cast<int>(mol.bond_count()); ++b) {
    const auto& bond = mol.bond(b);
    const int order = mol.bond_aromatic(b) ? 4 : mol.kekule_order(b);
    adjacency_[static_cast<std::size_t>(bond.begin)].push_back({bond.end, order, mol.bond_in_ring(b)});
    adjacency_[static_cast<std::size_t>(bond.end)].push_back({bond.begin, order, mol.bond_in_ring(b)});
  }
  for (int a = 0; a < n; ++a) {
    const auto& atom = mol.atom(a);
    auto& node = nodes_[static_cast<std::size_t>(a)];
    node.element = atom.element;
    node.aromatic = mol.aromatic(a);
    node.charge = atom.formal_charge;
    node.isotope = atom.isotope.value_or(-1);
    node.valence = mol.valence(a);
    node.ring_count = mol.atom_ring_count(a);
    for (const auto& ring : mol.rings()) {
      if (std::find(ring.begin(), ring.end(), a) == ring.end()) continue;
      const int size = static_cast<int>(ring.size());
      node.smallest_ring = node.smallest_ring == 0 ? size : std::min(node.smallest_ring, size);
    }
    int h_neighbours = 0;
    for (const auto& e : adjacency_[static_cast<std::size_t>(a)]) {
      if (mol.atom(e.to).element == 1) ++h_neighbours;
    }
    node.total_h = mol.total_h(a) + h_neighbours;
    node.degree = mol.degree(a);
    node.connectivity = node.degree + mol.total_h(a);
  }
  if (!explicit_hydrogens) return;
  for (int a = 0; a < n; ++a) {
    const int h = mol.total_h(a);
    for (int k = 0; k < h; ++k) {
      const int index = static_cast<int>(nodes_.size());
      Node hydrogen;
      hydrogen.element = 1;
      hydrogen.degree = 1;
      hydrogen.connectivity = 1;
      hydrogen.valence = 1;
      nodes_.push_back(hydrogen);
      adjacency_.push_back({{a, 1, false}});
      adjacency_[static_cast<std::size_t>(a)].push_back({index, 1, false});
    }
    nodes_[static_cast<std::size_t>(a)].degree += h;
  }
}

const MatchTarget::Edge* MatchTarget::edge_between(int a, int b) const {
  for (const auto& e : adjacency_[static_cast<std::size_t>(a)]) {
    if (e.to == b) return &e;
  }
  return nullptr;
}

Pattern Pattern::parse(std::string_view smarts) { return PatternParser(smarts).run(); }

Pattern Pattern::from_fragment(const MolGraph& fragment) {
  Pattern p;
  for (int a = 0; a < static_cast<int>(fragment.atom_count()); ++a) {
    const auto& atom = fragment.atom(a);
    Expr e = element_expr(atom.element, atom.aromatic_flag);
    if (atom.isotope) e = combine(Expr::Op::kAnd, std::move(e), prim(kIsotope, *atom.isotope));
    if (atom.bracketed && atom.formal_charge != 0) e = combine(Expr::Op::kAnd, std::move(e), prim(kCharge, atom.formal_charge));
    if (atom.bracketed && atom.explicit_h.value_or(0) > 0) {
      e = combine(Expr::Op::kAnd, std::move(e), prim(kTotalH, *atom.explicit_h));
    }
    p.atoms_.push_back(std::move(e));
  }
  for (const auto& b : fragment.bonds()) p.bonds_.push_back({b.begin, b.end, prim(kBondOrder, static_cast<int>(b.order))});
  p.source_ = "fragment";
  p.finalize();
  return p;
}

void Pattern::finalize() {
  const int n = static_cast<int>(atoms_.size());
  std::vector<std::vector<int>> incident(static_cast<std::size_t>(n));
  for (int b = 0; b < static_cast<int>(bonds_.size()); ++b) {
    incident[static_cast<std::size_t>(bonds_[static_cast<std::size_t>(b)].a)].push_back(b);
    incident[static_cast<std::size_t>(bonds_[static_cast<std::size_t>(b)].b)].push_back(b);
  }
  std::vector<int> position(static_cast<std::size_t>(n), -1);
  order_.clear();
  for (int start = 0; start < n; ++start) {
    if (position[static_cast<std::size_t>(start)] >= 0) continue;
    std::vector<int> queue{start};
    position[static_cast<std::size_t>(start)] = static_cast<int>(order_.size());
    order_.push_back(start);
    for (std::size_t q = 0; q < queue.size(); ++q) {
      for (int b : incident[static_cast<std::size_t>(queue[q])]) {
        const auto& bond = bonds_[static_cast<std::size_t>(b)];
        const int other = bond.a == queue[q] ? bond.b : bond.a;
        if (position[static_cast<std::size_t>(other)] >= 0) continue;
        position[static_cast<std::size_t>(other)] = static_cast<int>(order_.size());
        order_.push_back(other);
        queue.push_back(other);
      }
    }
  }
  back_bonds_.assign(order_.size(), {});
  for (std::size_t i = 0; i < order_.size(); ++i) {
    const int atom = order_[i];
    std::vector<std::pair<int, int>> back;
    for (int b : incident[static_cast<std::size_t>(atom)]) {
      const auto& bond = bonds_[static_cast<std::size_t>(b)];
      const int other = bond.a == atom ? bond.b : bond.a;
      if (position[static_cast<std::size_t>(other)] < static_cast<int>(i)) back.emplace_back(position[static_cast<std::size_t>(other)], b);
    }
    std::sort(back.begin(), back.end());
    for (const auto& [pos, b] : back) back_bonds_[i].push_back(b);
  }
}

bool Pattern::matches_at(const MatchTarget& target, int node) const {
  bool found = false;
  PatternMatcher(*this, target).search(node, [&](const std::vector<int>&) {
    found = true;
    return false;
  });
  return found;
}

bool Pattern::matches(const MatchTarget& target) const {
  bool found = false;
  PatternMatcher(*this, target).search(-1, [&](const std::vector<int>&) {
    found = true;
    return false;
  });
  return found;
}

std::vector<std::vector<int>> Pattern::find_all(const MatchTarget& target, bool unique) const {
  std::vector<std::vector<int>> out;
  std::set<std::vector<int>> seen;
  PatternMatcher(*this, target).search(-1, [&](const std::vector<int>& map) {
    if (unique) {
      auto key = map;
      std::sort(key.begin(), key.end());
      if (!seen.insert(std::move(key)).second) return true;
    }
    out.push_back(map);
    return true;
  });
  return out;
}

}  // namespace molrefine
