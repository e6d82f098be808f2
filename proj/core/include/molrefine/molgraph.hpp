// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "molrefine/parse_error.hpp"

namespace molrefine {

enum class BondOrder : std::uint8_t { kSingle = 1, kDouble = 2, kTriple = 3, kAromatic = 4 };

struct Atom {
  int element = 6;
  int formal_charge = 0;
  /// Hydrogen count written inside brackets; unset for organic-subset atoms.
  std::optional<int> explicit_h;
  std::optional<int> isotope;
  /// Lowercase (aromatic) symbol in the input.
  bool aromatic_flag = false;
  bool bracketed = false;

  bool operator==(const Atom&) const = default;
};

struct Bond {
  int begin = 0;
  int end = 0;
  /// Order as written; kAromatic for ':' and for unspecified ring bonds between aromatic atoms.
  BondOrder order = BondOrder::kSingle;

  int other(int atom) const { return atom == begin ? end : begin; }
  bool operator==(const Bond&) const = default;
};

using Ring = std::vector<int>;

struct BuildOptions {
  /// Input byte offset per atom, for error positions.
  std::span<const std::size_t> atom_positions;
  /// Hydrogens that were written as separate [H] atoms and folded into an
  /// organic-subset neighbour; they count against its valence.
  std::span<const int> folded_h;
  /// When false, valence and aromaticity checks are skipped and written orders
  /// are kept (query fragments).
  bool validate = true;
};

/// Immutable, validated molecular graph. Hydrogens are implicit counts, except
/// for hydrogen atoms that cannot be folded into a heavy neighbour.
///
/// Besides the written atoms and bonds, a MolGraph carries the derived state the
/// descriptor and fingerprint code needs: a smallest set of smallest rings, one
/// Kekule assignment, implicit hydrogen counts, and perceived aromaticity (which
/// may differ from the lowercase flags of the input, e.g. for Kekule-form input).
class MolGraph {
 public:
  /// Runs ring perception, the valence check, kekulization and aromaticity
  /// perception.
  static std::variant<MolGraph, ParseError> build(std::vector<Atom> atoms, std::vector<Bond> bonds,
                                                  const BuildOptions& options = {});

  std::size_t atom_count() const { return atoms_.size(); }
  std::size_t bond_count() const { return bonds_.size(); }
  const Atom& atom(int index) const { return atoms_[static_cast<std::size_t>(index)]; }
  const Bond& bond(int index) const { return bonds_[static_cast<std::size_t>(index)]; }
  std::span<const Atom> atoms() const { return atoms_; }
  std::span<const Bond> bonds() const { return bonds_; }

  std::span<const int> incident_bonds(int atom) const;
  /// Number of graph neighbours (hydrogens are not graph neighbours).
  int degree(int atom) const { return static_cast<int>(incident_bonds(atom).size()); }
  std::optional<int> bond_between(int a, int b) const;

  const std::vector<Ring>& rings() const { return rings_; }
  bool atom_in_ring(int atom) const { return atom_ring_count_[static_cast<std::size_t>(atom)] > 0; }
  int atom_ring_count(int atom) const { return atom_ring_count_[static_cast<std::size_t>(atom)]; }
  bool bond_in_ring(int bond) const { return bond_ring_count_[static_cast<std::size_t>(bond)] > 0; }
  bool atom_in_ring_of_size(int atom, std::size_t size) const;
  int component_count() const { return components_; }

  /// Hydrogens not written as a bracket count, including folded [H] atoms.
  int implicit_h(int atom) const { return implicit_h_[static_cast<std::size_t>(atom)]; }
  int total_h(int atom) const;
  /// 1, 2 or 3 under the stored Kekule assignment.
  int kekule_order(int bond) const { return kekule_[static_cast<std::size_t>(bond)]; }
  /// Sum of Kekule bond orders plus all hydrogens.
  int valence(int atom) const;

  bool aromatic(int atom) const { return aromatic_atom_[static_cast<std::size_t>(atom)] != 0; }
  bool bond_aromatic(int bond) const { return aromatic_bond_[static_cast<std::size_t>(bond)] != 0; }

  /// Relabelled copy: atom i of this graph becomes atom new_index[i].
  MolGraph permuted(std::span<const int> new_index) const;

  /// False for query fragments built without chemistry checks.
  bool validated() const { return validated_; }

 private:
  MolGraph() = default;

  std::vector<Atom> atoms_;
  std::vector<Bond> bonds_;
  std::vector<int> adjacency_offsets_;
  std::vector<int> adjacency_;
  std::vector<Ring> rings_;
  std::vector<int> atom_ring_count_;
  std::vector<int> bond_ring_count_;
  std::vector<int> implicit_h_;
  std::vector<int> folded_h_;
  std::vector<int> kekule_;
  std::vector<std::uint8_t> aromatic_atom_;
  std::vector<std::uint8_t> aromatic_bond_;
  int components_ = 0;
  bool validated_ = true;
};

}  // namespace molrefine
