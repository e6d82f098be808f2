// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "molrefine/molgraph.hpp"

namespace molrefine::detail {

struct AromaticityInput {
  std::span<const Atom> atoms;
  std::span<const Bond> bonds;
  std::span<const std::vector<int>> incident;
  std::span<const Ring> rings;
  std::span<const int> kekule;
  std::span<const int> total_h;
  std::span<const int> bond_ring_count;
};

struct AromaticityFlags {
  std::vector<std::uint8_t> atoms;
  std::vector<std::uint8_t> bonds;
};

/// Hueckel 4n+2 perception over single rings and bond-fused ring combinations,
/// counting pi electrons per atom from the Kekule structure.
AromaticityFlags perceive_aromaticity(const AromaticityInput& in);

}  // namespace molrefine::detail
