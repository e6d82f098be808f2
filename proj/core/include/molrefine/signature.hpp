// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molrefine/molgraph.hpp"

namespace molrefine {

/// Per-atom codes after iterative neighbourhood refinement has stabilised.
/// Atoms in the same orbit get the same code; labels play no role.
std::vector<std::uint64_t> refined_atom_codes(const MolGraph& mol);

/// 16 hex digits hashing the sorted multiset of refined atom codes together with
/// atom and bond counts. Invariant under atom reindexing.
std::string graph_signature(const MolGraph& mol);

}  // namespace molrefine
