// SPDX-License-Identifier: Apache-2.0
#include "molrefine/parse_error.hpp"

#include <fmt/format.h>

namespace molrefine {

std::string_view category_name(ParseErrorCategory category) {
  switch (category) {
    case ParseErrorCategory::kSyntax: return "syntax";
    case ParseErrorCategory::kParentheses: return "parentheses";
    case ParseErrorCategory::kUnclosedRing: return "unclosed_ring";
    case ParseErrorCategory::kDuplicateBond: return "duplicate_bond";
    case ParseErrorCategory::kValence: return "valence";
    case ParseErrorCategory::kAromaticity: return "aromaticity";
  }
  return "syntax";
}

std::optional<ParseErrorCategory> category_from_name(std::string_view name) {
  for (auto c : kAllParseErrorCategories) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string ParseError::message() const {
  if (position) return fmt::format("{}: {} at position {}", category_name(category), detail, *position);
  return fmt::format("{}: {}", category_name(category), detail);
}

}  // namespace molrefine
