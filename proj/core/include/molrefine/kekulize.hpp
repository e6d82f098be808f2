// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "molrefine/molgraph.hpp"
#include "molrefine/parse_error.hpp"

namespace molrefine {

/// True when an aromatic atom must receive one double bond inside its ring system:
/// it has no multiple bond outside the aromatic system and its smallest permitted
/// valence leaves room for one more bond order.
bool needs_double_bond(const Atom& atom, std::span<const Bond> bonds, std::span<const int> incident);

/// Assigns alternating single/double orders to aromatic bonds through a maximum
/// matching over the atoms that need a double bond. Returns one order (1, 2 or 3)
/// per bond, or an aromaticity error when an aromatic atom lies outside every
/// ring or no perfect matching exists.
std::variant<std::vector<int>, ParseError> kekulize(std::span<const Atom> atoms,
                                                    std::span<const Bond> bonds,
                                                    std::span<const Ring> rings,
                                                    std::span<const std::size_t> atom_positions = {});

}  // namespace molrefine
