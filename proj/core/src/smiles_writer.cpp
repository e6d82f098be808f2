// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "molrefine/element.hpp"
#include "molrefine/signature.hpp"
#include "molrefine/smiles.hpp"

namespace molrefine {
namespace {

struct RingBond {
  int bond;
  int partner;
  bool opens;
};

class Writer {
 public:
  Writer(const MolGraph& mol, bool aromatic_form) : mol_(mol), aromatic_form_(aromatic_form) {}

  std::string run() {
    const auto n = mol_.atom_count();
    order_.assign(n, -1);
    parent_bond_.assign(n, -1);
    children_.assign(n, {});
    ring_bonds_.assign(n, {});
    for (std::size_t root = 0; root < n; ++root) {
      if (order_[root] >= 0) continue;
      if (!out_.empty()) out_ += '.';
      discover(static_cast<int>(root));
      emit(static_cast<int>(root));
    }
    return out_;
  }

 private:
  bool lowercase(int atom) const {
    return aromatic_form_ ? (mol_.validated() ? mol_.aromatic(atom) : mol_.atom(atom).aromatic_flag) : false;
  }

  bool aromatic_bond(int bond) const {
    const auto& b = mol_.bond(bond);
    if (!lowercase(b.begin) || !lowercase(b.end)) return false;
    return mol_.validated() ? mol_.bond_aromatic(bond) : b.order == BondOrder::kAromatic;
  }

  std::string bond_symbol(int bond) const {
    const auto& b = mol_.bond(bond);
    if (aromatic_bond(bond)) return "";
    const int order = mol_.validated() ? mol_.kekule_order(bond) : static_cast<int>(b.order);
    switch (order) {
      case 2: return "=";
      case 3: return "#";
      case 4: return ":";
      default: return lowercase(b.begin) && lowercase(b.end) ? "-" : "";
    }
  }

  // Iterative DFS fixing tree children and ring-closure bonds.
  void discover(int root) {
    std::vector<std::pair<int, std::size_t>> stack{{root, 0}};
    order_[static_cast<std::size_t>(root)] = counter_++;
    while (!stack.empty()) {
      auto& [u, next] = stack.back();
      const auto bonds = sorted_bonds(u);
      if (next >= bonds.size()) {
        stack.pop_back();
        continue;
      }
      const int b = bonds[next++];
      const int v = mol_.bond(b).other(u);
      if (b == parent_bond_[static_cast<std::size_t>(u)]) continue;
      if (order_[static_cast<std::size_t>(v)] < 0) {
        order_[static_cast<std::size_t>(v)] = counter_++;
        parent_bond_[static_cast<std::size_t>(v)] = b;
        children_[static_cast<std::size_t>(u)].push_back(v);
        stack.emplace_back(v, 0);
      } else if (order_[static_cast<std::size_t>(v)] < order_[static_cast<std::size_t>(u)] &&
                 !is_ring_bond(u, b)) {
        ring_bonds_[static_cast<std::size_t>(v)].push_back({b, u, true});
        ring_bonds_[static_cast<std::size_t>(u)].push_back({b, v, false});
      }
    }
  }

  bool is_ring_bond(int atom, int bond) const {
    const auto& list = ring_bonds_[static_cast<std::size_t>(atom)];
    return std::any_of(list.begin(), list.end(), [&](const RingBond& r) { return r.bond == bond; });
  }

  std::vector<int> sorted_bonds(int atom) const {
    auto span = mol_.incident_bonds(atom);
    std::vector<int> bonds(span.begin(), span.end());
    std::sort(bonds.begin(), bonds.end(), [&](int x, int y) { return mol_.bond(x).other(atom) < mol_.bond(y).other(atom); });
    return bonds;
  }

  std::string atom_text(int atom) const {
    const auto& a = mol_.atom(atom);
    const bool lower = lowercase(atom);
    std::string symbol(element_info(a.element).symbol);
    if (lower) std::transform(symbol.begin(), symbol.end(), symbol.begin(), [](unsigned char c) { return std::tolower(c); });
    const int h = mol_.total_h(atom);
    if (!needs_bracket(atom, h)) return symbol;
    std::string text = "[";
    if (a.isotope) text += std::to_string(*a.isotope);
    text += symbol;
    if (h == 1) text += 'H';
    if (h > 1) text += fmt::format("H{}", h);
    if (a.formal_charge > 0) text += a.formal_charge == 1 ? "+" : fmt::format("+{}", a.formal_charge);
    if (a.formal_charge < 0) text += a.formal_charge == -1 ? "-" : fmt::format("-{}", -a.formal_charge);
    return text + "]";
  }

  // An atom can be written bare when re-reading it would give the same hydrogens.
  bool needs_bracket(int atom, int h) const {
    const auto& a = mol_.atom(atom);
    if (!is_organic_subset(a.element) || a.formal_charge != 0 || a.isotope) return true;
    if (!mol_.validated()) return a.bracketed;
    int sum = 0;
    bool has_aromatic = false;
    for (int b : mol_.incident_bonds(atom)) {
      if (aromatic_bond(b)) {
        has_aromatic = true;
        sum += 1;
      } else {
        sum += mol_.kekule_order(b);
      }
    }
    if (has_aromatic) {
      // Bare aromatic atoms take one double bond whenever their valence leaves room.
      const auto valences = organic_valences(a.element);
      bool needs = false;
      for (int v : valences) {
        if (v >= sum) {
          needs = v - sum >= 1;
          break;
        }
      }
      int kekule_sum = 0;
      bool has_double = false;
      for (int b : mol_.incident_bonds(atom)) {
        kekule_sum += mol_.kekule_order(b);
        if (aromatic_bond(b) && mol_.kekule_order(b) == 2) has_double = true;
      }
      if (needs != has_double) return true;
      sum = kekule_sum;
    }
    for (int v : organic_valences(a.element)) {
      if (v >= sum) return v - sum != h;
    }
    return true;
  }

  std::string ring_label(int digit) const { return digit < 10 ? std::to_string(digit) : fmt::format("%{:02}", digit); }

  void emit(int atom) {
    out_ += atom_text(atom);
    auto& rings = ring_bonds_[static_cast<std::size_t>(atom)];
    std::set<int> released;
    for (const auto& r : rings) {
      if (r.opens) continue;
      const int digit = digits_.at(r.bond);
      out_ += ring_label(digit);
      in_use_.erase(digit);
      released.insert(digit);
    }
    auto by_partner = rings;
    std::stable_sort(by_partner.begin(), by_partner.end(), [](const RingBond& x, const RingBond& y) { return x.partner < y.partner; });
    for (const auto& r : by_partner) {
      if (!r.opens) continue;
      int digit = 1;
      while (in_use_.count(digit) || released.count(digit)) ++digit;
      in_use_.insert(digit);
      digits_[r.bond] = digit;
      out_ += bond_symbol(r.bond) + ring_label(digit);
    }
    const auto& kids = children_[static_cast<std::size_t>(atom)];
    for (std::size_t i = 0; i < kids.size(); ++i) {
      const int child = kids[i];
      const bool last = i + 1 == kids.size();
      if (!last) out_ += '(';
      out_ += bond_symbol(parent_bond_[static_cast<std::size_t>(child)]);
      emit(child);
      if (!last) out_ += ')';
    }
  }

  const MolGraph& mol_;
  bool aromatic_form_;
  std::vector<int> order_;
  std::vector<int> parent_bond_;
  std::vector<std::vector<int>> children_;
  std::vector<std::vector<RingBond>> ring_bonds_;
  std::map<int, int> digits_;
  std::set<int> in_use_;
  int counter_ = 0;
  std::string out_;
};

}  // namespace

std::string write_smiles(const MolGraph& mol) {
  auto aromatic = Writer(mol, true).run();
  if (!mol.validated()) return aromatic;
  const auto signature = graph_signature(mol);
  auto check = [&](const std::string& text) {
    auto outcome = parse_smiles(text);
    return outcome.valid() && graph_signature(outcome.molecule()) == signature;
  };
  if (check(aromatic)) return aromatic;
  return Writer(mol, false).run();
}

}  // namespace molrefine
