// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "molrefine/molgraph.hpp"

namespace molrefine {

/// Flattened view of a molecule for pattern matching. With explicit hydrogens
/// every hydrogen becomes its own node, otherwise hydrogens are counts.
class MatchTarget {
 public:
  struct Node {
    int element = 0;
    bool aromatic = false;
    int charge = 0;
    int isotope = -1;
    int total_h = 0;
    int degree = 0;
    int connectivity = 0;
    int valence = 0;
    int ring_count = 0;
    int smallest_ring = 0;
  };
  struct Edge {
    int to = 0;
    /// 1, 2, 3, or 4 for aromatic.
    int order = 1;
    bool ring = false;
  };

  MatchTarget(const MolGraph& mol, bool explicit_hydrogens);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Edge>& edges(int i) const { return adjacency_[static_cast<std::size_t>(i)]; }
  const Edge* edge_between(int a, int b) const;

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<Edge>> adjacency_;
};

/// A query over atoms and bonds: the subset of SMARTS made of atomic primitives
/// (#n, symbols, a, A, *, H, D, X, v, R, r, charge, isotope), recursive $(...)
/// environments, the ! & , ; operators, bond primitives - = # : ~ @, branches
/// and ring closures.
class Pattern {
 public:
  struct Expr {
    enum class Op { kTrue, kPrim, kNot, kAnd, kOr };
    Op op = Op::kTrue;
    int prim = 0;
    int value = 0;
    std::vector<Expr> kids;
  };
  struct Bond {
    int a = 0;
    int b = 0;
    Expr expr;
  };

  /// Throws std::invalid_argument on unsupported or malformed input.
  static Pattern parse(std::string_view smarts);

  /// Query matching the fragment literally: element and aromaticity for every
  /// atom, plus isotope, non-zero charge and non-zero hydrogen count where the
  /// fragment writes them in brackets; bonds match their written order.
  static Pattern from_fragment(const MolGraph& fragment);

  std::size_t atom_count() const { return atoms_.size(); }
  const std::string& source() const { return source_; }

  /// True when some embedding maps pattern atom 0 onto `node`.
  bool matches_at(const MatchTarget& target, int node) const;
  bool matches(const MatchTarget& target) const;
  /// All embeddings as target node lists in pattern-atom order. With `unique`,
  /// embeddings covering the same node set are reported once.
  std::vector<std::vector<int>> find_all(const MatchTarget& target, bool unique) const;

 private:
  friend class PatternParser;
  friend class PatternMatcher;

  void finalize();

  std::string source_;
  std::vector<Expr> atoms_;
  std::vector<Bond> bonds_;
  std::vector<std::shared_ptr<const Pattern>> recursive_;
  // Matching order and, per position, the bonds back to already placed atoms.
  std::vector<int> order_;
  std::vector<std::vector<int>> back_bonds_;
};

}  // namespace molrefine
