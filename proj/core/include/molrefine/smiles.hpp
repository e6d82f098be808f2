// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "molrefine/molgraph.hpp"
#include "molrefine/parse_error.hpp"

namespace molrefine {

/// Either a validated molecule or exactly one classified error.
struct ParseOutcome {
  std::variant<MolGraph, ParseError> value;

  bool valid() const { return std::holds_alternative<MolGraph>(value); }
  const MolGraph& molecule() const { return std::get<MolGraph>(value); }
  const ParseError& error() const { return std::get<ParseError>(value); }
};

struct ParseOptions {
  /// Skip valence, ring-membership and kekulization checks. Used for query
  /// fragments such as structural alerts, which need not be whole molecules.
  bool fragment = false;
};

/// Parses an organic-subset SMILES string. Stereo markers are accepted and
/// dropped. Checks run in precedence order syntax, parentheses, unclosed ring,
/// duplicate bond, valence, aromaticity; only the first failing class is reported.
ParseOutcome parse_smiles(std::string_view text, const ParseOptions& options = {});

/// Depth-first from atom 0, branches in atom-index order, ring-closure digits
/// reused lowest-first. Aromatic atoms are written lowercase when that form
/// re-parses to the same graph, otherwise the Kekule form is written.
std::string write_smiles(const MolGraph& mol);

}  // namespace molrefine
