// SPDX-License-Identifier: Apache-2.0
#include "molrefine/kekulize.hpp"

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/max_cardinality_matching.hpp>
#include <fmt/format.h>

#include "molrefine/element.hpp"

namespace molrefine {
namespace {

// Heavier chalcogens and pnictogens behave like S and P inside aromatic rings.
int valence_proxy(int element) {
  switch (element) {
    case 34:
    case 52: return 16;
    case 33: return 15;
    default: return element;
  }
}

std::optional<std::size_t> position_of(std::span<const std::size_t> positions, int atom) {
  if (static_cast<std::size_t>(atom) < positions.size()) return positions[static_cast<std::size_t>(atom)];
  return std::nullopt;
}

}  // namespace

bool needs_double_bond(const Atom& atom, std::span<const Bond> bonds, std::span<const int> incident) {
  if (!atom.aromatic_flag) return false;
  int sigma = atom.bracketed ? atom.explicit_h.value_or(0) : 0;
  for (int b : incident) {
    const auto order = bonds[static_cast<std::size_t>(b)].order;
    if (order == BondOrder::kAromatic) {
      sigma += 1;
    } else {
      if (order != BondOrder::kSingle) return false;
      sigma += 1;
    }
  }
  const auto valences = allowed_valences(valence_proxy(atom.element), atom.formal_charge);
  for (int v : valences) {
    if (v >= sigma) return v - sigma >= 1;
  }
  return false;
}

std::variant<std::vector<int>, ParseError> kekulize(std::span<const Atom> atoms, std::span<const Bond> bonds,
                                                    std::span<const Ring> rings,
                                                    std::span<const std::size_t> atom_positions) {
  const auto n = atoms.size();
  std::vector<bool> in_ring(n, false);
  for (const auto& r : rings) {
    for (int a : r) in_ring[static_cast<std::size_t>(a)] = true;
  }
  std::vector<std::vector<int>> incident(n);
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    incident[static_cast<std::size_t>(bonds[i].begin)].push_back(static_cast<int>(i));
    incident[static_cast<std::size_t>(bonds[i].end)].push_back(static_cast<int>(i));
  }

  for (std::size_t a = 0; a < n; ++a) {
    if (atoms[a].aromatic_flag && !in_ring[a]) {
      return ParseError{ParseErrorCategory::kAromaticity,
                        fmt::format("aromatic atom {} (index {}) is not in a ring",
                                    element_info(atoms[a].element).symbol, a),
                        position_of(atom_positions, static_cast<int>(a))};
    }
  }
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    const auto& b = bonds[i];
    if (b.order != BondOrder::kAromatic) continue;
    if (!atoms[static_cast<std::size_t>(b.begin)].aromatic_flag || !atoms[static_cast<std::size_t>(b.end)].aromatic_flag) {
      const int culprit = atoms[static_cast<std::size_t>(b.begin)].aromatic_flag ? b.end : b.begin;
      return ParseError{ParseErrorCategory::kAromaticity,
                        fmt::format("aromatic bond to non-aromatic atom {} (index {})",
                                    element_info(atoms[static_cast<std::size_t>(culprit)].element).symbol, culprit),
                        position_of(atom_positions, culprit)};
    }
  }

  std::vector<int> orders(bonds.size(), 1);
  std::vector<int> vertex_of(n, -1);
  std::vector<int> atom_of;
  for (std::size_t a = 0; a < n; ++a) {
    if (needs_double_bond(atoms[a], bonds, incident[a])) {
      vertex_of[a] = static_cast<int>(atom_of.size());
      atom_of.push_back(static_cast<int>(a));
    }
  }
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    if (bonds[i].order != BondOrder::kAromatic) orders[i] = static_cast<int>(bonds[i].order);
  }
  if (atom_of.empty()) return orders;

  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
  Graph g(atom_of.size());
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    const auto& b = bonds[i];
    if (b.order != BondOrder::kAromatic) continue;
    const int u = vertex_of[static_cast<std::size_t>(b.begin)];
    const int v = vertex_of[static_cast<std::size_t>(b.end)];
    if (u >= 0 && v >= 0) boost::add_edge(static_cast<std::size_t>(u), static_cast<std::size_t>(v), g);
  }
  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(atom_of.size());
  boost::edmonds_maximum_cardinality_matching(g, &mate[0]);
  const auto null_vertex = boost::graph_traits<Graph>::null_vertex();

  for (std::size_t v = 0; v < atom_of.size(); ++v) {
    if (mate[v] == null_vertex) {
      const int a = atom_of[v];
      return ParseError{ParseErrorCategory::kAromaticity,
                        fmt::format("cannot kekulize aromatic system: atom {} (index {}) gets no double bond",
                                    element_info(atoms[static_cast<std::size_t>(a)].element).symbol, a),
                        position_of(atom_positions, a)};
    }
  }
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    const auto& b = bonds[i];
    if (b.order != BondOrder::kAromatic) continue;
    const int u = vertex_of[static_cast<std::size_t>(b.begin)];
    const int v = vertex_of[static_cast<std::size_t>(b.end)];
    if (u >= 0 && v >= 0 && mate[static_cast<std::size_t>(u)] == static_cast<std::size_t>(v)) orders[i] = 2;
  }
  return orders;
}

}  // namespace molrefine
