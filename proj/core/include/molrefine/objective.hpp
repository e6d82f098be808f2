// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "molrefine/descriptors.hpp"

namespace molrefine {

enum class Direction { kIncrease, kDecrease };

std::string_view direction_word(Direction d);  // "increase" / "decrease"
/// +1 for increase, -1 for decrease.
inline int direction_sign(Direction d) { return d == Direction::kIncrease ? 1 : -1; }

struct ObjectiveTerm {
  PropertyId property;
  Direction direction = Direction::kIncrease;
  /// Unsigned threshold; the sign comes from `direction`.
  double magnitude = 0.0;

  /// magnitude with the direction's sign applied.
  double signed_threshold() const { return direction_sign(direction) * magnitude; }
  bool operator==(const ObjectiveTerm&) const = default;
};

struct ObjectiveSpec {
  std::vector<ObjectiveTerm> terms;
  std::string name;

  bool operator==(const ObjectiveSpec&) const = default;
};

struct TermEvaluation {
  double observed_delta = 0.0;
  bool satisfied = false;
};

struct EvaluationResult {
  std::vector<TermEvaluation> per_term;
  bool overall = false;
};

struct GradientTerm {
  PropertyId property;
  Direction direction = Direction::kIncrease;
  double residual = 0.0;
};

struct Gradient {
  std::vector<GradientTerm> per_term;
};

/// Throws ConfigError when a spec property is missing from either vector.
EvaluationResult evaluate(const ObjectiveSpec& spec, const PropertyVector& props_m, const PropertyVector& props_mhat);
Gradient gradient(const ObjectiveSpec& spec, const PropertyVector& props_m, const PropertyVector& props_mhat);

/// Single-property presets (12) then two-property presets (16), loose before strict.
const std::vector<ObjectiveSpec>& load_presets();
/// Strict threshold for a property; loose thresholds are 0.
double strict_magnitude(std::string_view property);

/// "+LogP:0.5,-TPSA:10" form, or a preset name such as "single/strict/+LogP"
/// or "multi/loose/+LogP-TPSA". Throws ConfigError on malformed text.
ObjectiveSpec parse_objective(std::string_view text);
std::string to_compact(const ObjectiveSpec& spec);

/// Throws ConfigError unless the spec has terms with distinct registered
/// properties and finite non-negative magnitudes.
void validate(const ObjectiveSpec& spec);

}  // namespace molrefine
