// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "molrefine/molgraph.hpp"

namespace molrefine {

/// Smallest set of smallest rings: a minimum-weight cycle basis with
/// E - V + C members, each given as atoms in cyclic order. Ties between
/// equally short cycles are resolved by discovery order, so the result is
/// deterministic for a given atom and bond order.
std::vector<Ring> perceive_rings(std::size_t atom_count, std::span<const Bond> bonds);

/// True for every bond that lies on at least one cycle (i.e. is not a bridge).
std::vector<bool> cyclic_bonds(std::size_t atom_count, std::span<const Bond> bonds);

}  // namespace molrefine
