// SPDX-License-Identifier: Apache-2.0
#include "molrefine/molgraph.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "aromaticity.hpp"
#include "molrefine/element.hpp"
#include "molrefine/kekulize.hpp"
#include "molrefine/rings.hpp"

namespace molrefine {
namespace {

std::optional<std::size_t> position_of(std::span<const std::size_t> positions, std::size_t atom) {
  if (atom < positions.size()) return positions[atom];
  return std::nullopt;
}

ParseError valence_error(const Atom& atom, std::size_t index, int valence, std::span<const std::size_t> positions) {
  return ParseError{ParseErrorCategory::kValence,
                    fmt::format("atom {} (index {}) has valence {}, above the allowed maximum {}",
                                element_info(atom.element).symbol, index, valence,
                                allowed_valences(atom.element, atom.formal_charge).back()),
                    position_of(positions, index)};
}

int count_components(std::size_t n, std::span<const Bond> bonds) {
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[static_cast<std::size_t>(x)] != x) {
      parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
      x = parent[static_cast<std::size_t>(x)];
    }
    return x;
  };
  int components = static_cast<int>(n);
  for (const auto& b : bonds) {
    const int ra = find(b.begin);
    const int rb = find(b.end);
    if (ra != rb) {
      parent[static_cast<std::size_t>(ra)] = rb;
      --components;
    }
  }
  return components;
}

}  // namespace

std::variant<MolGraph, ParseError> MolGraph::build(std::vector<Atom> atoms, std::vector<Bond> bonds,
                                                   const BuildOptions& options) {
  const auto n = atoms.size();
  for (const auto& b : bonds) {
    if (b.begin < 0 || b.end < 0 || static_cast<std::size_t>(b.begin) >= n || static_cast<std::size_t>(b.end) >= n ||
        b.begin == b.end) {
      throw std::invalid_argument("bond endpoints out of range");
    }
  }

  MolGraph g;
  g.validated_ = options.validate;
  g.folded_h_.assign(n, 0);
  for (std::size_t i = 0; i < n && i < options.folded_h.size(); ++i) g.folded_h_[i] = options.folded_h[i];

  // Aromatic bonds outside any cycle cannot be aromatic; read them as single.
  if (options.validate) {
    const auto cyclic = cyclic_bonds(n, bonds);
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      if (bonds[i].order == BondOrder::kAromatic && !cyclic[i]) bonds[i].order = BondOrder::kSingle;
    }
  }

  g.atoms_ = std::move(atoms);
  g.bonds_ = std::move(bonds);
  g.adjacency_offsets_.assign(n + 1, 0);
  for (const auto& b : g.bonds_) {
    ++g.adjacency_offsets_[static_cast<std::size_t>(b.begin) + 1];
    ++g.adjacency_offsets_[static_cast<std::size_t>(b.end) + 1];
  }
  for (std::size_t i = 0; i < n; ++i) g.adjacency_offsets_[i + 1] += g.adjacency_offsets_[i];
  g.adjacency_.assign(static_cast<std::size_t>(g.adjacency_offsets_[n]), 0);
  {
    std::vector<int> fill(g.adjacency_offsets_.begin(), g.adjacency_offsets_.end() - 1);
    for (std::size_t i = 0; i < g.bonds_.size(); ++i) {
      const auto& b = g.bonds_[i];
      g.adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(b.begin)]++)] = static_cast<int>(i);
      g.adjacency_[static_cast<std::size_t>(fill[static_cast<std::size_t>(b.end)]++)] = static_cast<int>(i);
    }
  }

  g.rings_ = perceive_rings(n, g.bonds_);
  g.atom_ring_count_.assign(n, 0);
  g.bond_ring_count_.assign(g.bonds_.size(), 0);
  for (const auto& ring : g.rings_) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      ++g.atom_ring_count_[static_cast<std::size_t>(ring[i])];
      if (auto b = g.bond_between(ring[i], ring[(i + 1) % ring.size()])) ++g.bond_ring_count_[static_cast<std::size_t>(*b)];
    }
  }
  g.components_ = count_components(n, g.bonds_);

  const auto positions = options.atom_positions;
  g.implicit_h_.assign(n, 0);
  g.kekule_.assign(g.bonds_.size(), 1);

  if (!options.validate) {
    for (std::size_t i = 0; i < g.bonds_.size(); ++i) {
      const auto order = g.bonds_[i].order;
      g.kekule_[i] = order == BondOrder::kAromatic ? 1 : static_cast<int>(order);
    }
    g.aromatic_atom_.assign(n, 0);
    g.aromatic_bond_.assign(g.bonds_.size(), 0);
    for (std::size_t a = 0; a < n; ++a) {
      g.aromatic_atom_[a] = g.atoms_[a].aromatic_flag ? 1 : 0;
      if (g.atoms_[a].bracketed) continue;
      int sum = g.folded_h_[a];
      for (int b : g.incident_bonds(static_cast<int>(a))) sum += g.kekule_[static_cast<std::size_t>(b)];
      for (int v : organic_valences(g.atoms_[a].element)) {
        if (v >= sum) {
          g.implicit_h_[a] = v - sum + g.folded_h_[a];
          break;
        }
      }
    }
    for (std::size_t i = 0; i < g.bonds_.size(); ++i) {
      g.aromatic_bond_[i] = g.bonds_[i].order == BondOrder::kAromatic ? 1 : 0;
    }
    return g;
  }

  // Lower bound: every written bond counts at least once.
  for (std::size_t a = 0; a < n; ++a) {
    const auto& atom = g.atoms_[a];
    const auto allowed = allowed_valences(atom.element, atom.formal_charge);
    if (allowed.empty()) continue;
    int sum = atom.explicit_h.value_or(0) + g.folded_h_[a];
    for (int b : g.incident_bonds(static_cast<int>(a))) {
      const auto order = g.bonds_[static_cast<std::size_t>(b)].order;
      sum += order == BondOrder::kAromatic ? 1 : static_cast<int>(order);
    }
    if (sum > allowed.back()) return valence_error(atom, a, sum, positions);
  }

  auto kekule = kekulize(g.atoms_, g.bonds_, g.rings_, positions);
  if (auto* err = std::get_if<ParseError>(&kekule)) return std::move(*err);
  g.kekule_ = std::move(std::get<std::vector<int>>(kekule));

  for (std::size_t a = 0; a < n; ++a) {
    const auto& atom = g.atoms_[a];
    int sum = atom.explicit_h.value_or(0) + g.folded_h_[a];
    for (int b : g.incident_bonds(static_cast<int>(a))) sum += g.kekule_[static_cast<std::size_t>(b)];
    const auto allowed = allowed_valences(atom.element, atom.formal_charge);
    if (allowed.empty()) continue;
    if (sum > allowed.back()) return valence_error(atom, a, sum, positions);
    if (atom.bracketed) continue;
    const int v = *std::find_if(allowed.begin(), allowed.end(), [&](int x) { return x >= sum; });
    g.implicit_h_[a] = v - sum + g.folded_h_[a];
  }

  std::vector<std::vector<int>> incident(n);
  std::vector<int> total_h(n);
  for (std::size_t a = 0; a < n; ++a) {
    auto span = g.incident_bonds(static_cast<int>(a));
    incident[a].assign(span.begin(), span.end());
    total_h[a] = g.total_h(static_cast<int>(a));
  }
  auto flags = detail::perceive_aromaticity({g.atoms_, g.bonds_, incident, g.rings_, g.kekule_, total_h, g.bond_ring_count_});
  g.aromatic_atom_ = std::move(flags.atoms);
  g.aromatic_bond_ = std::move(flags.bonds);

  // Lowercase atoms must end up in a ring system that is actually aromatic.
  for (std::size_t a = 0; a < n; ++a) {
    if (g.atoms_[a].aromatic_flag && !g.aromatic_atom_[a]) {
      return ParseError{ParseErrorCategory::kAromaticity,
                        fmt::format("atom {} (index {}) is marked aromatic but its ring system is not aromatic",
                                    element_info(g.atoms_[a].element).symbol, a),
                        position_of(positions, a)};
    }
  }
  return g;
}

std::span<const int> MolGraph::incident_bonds(int atom) const {
  const auto a = static_cast<std::size_t>(atom);
  const auto begin = static_cast<std::size_t>(adjacency_offsets_[a]);
  const auto end = static_cast<std::size_t>(adjacency_offsets_[a + 1]);
  return std::span<const int>(adjacency_).subspan(begin, end - begin);
}

std::optional<int> MolGraph::bond_between(int a, int b) const {
  for (int bond : incident_bonds(a)) {
    if (bonds_[static_cast<std::size_t>(bond)].other(a) == b) return bond;
  }
  return std::nullopt;
}

bool MolGraph::atom_in_ring_of_size(int atom, std::size_t size) const {
  if (!atom_in_ring(atom)) return false;
  return std::any_of(rings_.begin(), rings_.end(), [&](const Ring& r) {
    return r.size() == size && std::find(r.begin(), r.end(), atom) != r.end();
  });
}

int MolGraph::total_h(int atom) const {
  return implicit_h_[static_cast<std::size_t>(atom)] + atoms_[static_cast<std::size_t>(atom)].explicit_h.value_or(0);
}

int MolGraph::valence(int atom) const {
  int sum = total_h(atom);
  for (int b : incident_bonds(atom)) sum += kekule_[static_cast<std::size_t>(b)];
  return sum;
}

MolGraph MolGraph::permuted(std::span<const int> new_index) const {
  if (new_index.size() != atoms_.size()) throw std::invalid_argument("permutation size mismatch");
  std::vector<Atom> atoms(atoms_.size());
  std::vector<int> folded(atoms_.size());
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    const auto j = static_cast<std::size_t>(new_index[i]);
    atoms[j] = atoms_[i];
    folded[j] = folded_h_[i];
  }
  std::vector<Bond> bonds;
  bonds.reserve(bonds_.size());
  for (const auto& b : bonds_) {
    bonds.push_back({new_index[static_cast<std::size_t>(b.begin)], new_index[static_cast<std::size_t>(b.end)], b.order});
  }
  auto result = build(std::move(atoms), std::move(bonds), {.atom_positions = {}, .folded_h = folded, .validate = validated_});
  if (auto* err = std::get_if<ParseError>(&result)) throw std::logic_error("relabelled graph failed validation: " + err->message());
  return std::move(std::get<MolGraph>(result));
}

}  // namespace molrefine
