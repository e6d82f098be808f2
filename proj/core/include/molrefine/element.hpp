// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace molrefine {

inline constexpr int kMaxElement = 118;

struct ElementInfo {
  std::string_view symbol;
  double atomic_weight;
  int outer_electrons;
};

/// Periodic-table entry for 1 <= atomic_number <= 118; throws std::out_of_range otherwise.
const ElementInfo& element_info(int atomic_number);

std::optional<int> element_from_symbol(std::string_view symbol);

/// Neutral valence list for the organic subset (B C N O P S F Cl Br I); empty for other elements.
std::span<const int> organic_valences(int atomic_number);

bool is_organic_subset(int atomic_number);

/// Valences permitted for a charged organic-subset atom. Group 15-17 elements gain
/// one bond per positive charge, carbon loses one per unit of either sign, and boron
/// follows its isoelectronic neighbour. Empty means the element is unconstrained.
std::vector<int> allowed_valences(int atomic_number, int charge);

}  // namespace molrefine
