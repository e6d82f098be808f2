// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace molrefine {

/// The six invalidity classes reported back to the proposer. Declaration order is
/// the reporting precedence when an input has several defects.
enum class ParseErrorCategory {
  kSyntax,
  kParentheses,
  kUnclosedRing,
  kDuplicateBond,
  kValence,
  kAromaticity,
};

inline constexpr ParseErrorCategory kAllParseErrorCategories[] = {
    ParseErrorCategory::kSyntax,        ParseErrorCategory::kParentheses,
    ParseErrorCategory::kUnclosedRing,  ParseErrorCategory::kDuplicateBond,
    ParseErrorCategory::kValence,       ParseErrorCategory::kAromaticity,
};

/// "syntax", "parentheses", "unclosed_ring", "duplicate_bond", "valence", "aromaticity".
std::string_view category_name(ParseErrorCategory category);
std::optional<ParseErrorCategory> category_from_name(std::string_view name);

struct ParseError {
  ParseErrorCategory category = ParseErrorCategory::kSyntax;
  std::string detail;
  /// Byte offset of the offending token in the (untrimmed) input.
  std::optional<std::size_t> position;

  /// "<category>: <detail> at position <n>", or without the suffix when the
  /// position is unknown. This text is quoted verbatim in feedback prompts.
  std::string message() const;

  bool operator==(const ParseError&) const = default;
};

}  // namespace molrefine
