// SPDX-License-Identifier: Apache-2.0
#include "molrefine/rings.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <set>

namespace molrefine {
namespace {

struct Adjacency {
  // neighbours[a] = list of (neighbour atom, bond index)
  std::vector<std::vector<std::pair<int, int>>> neighbours;

  Adjacency(std::size_t atom_count, std::span<const Bond> bonds, const std::vector<bool>* keep = nullptr)
      : neighbours(atom_count) {
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      if (keep && !(*keep)[i]) continue;
      const auto& b = bonds[i];
      neighbours[static_cast<std::size_t>(b.begin)].emplace_back(b.end, static_cast<int>(i));
      neighbours[static_cast<std::size_t>(b.end)].emplace_back(b.begin, static_cast<int>(i));
    }
  }
};

// Cycle as a set of bond indices, packed into 64-bit words for GF(2) elimination.
struct EdgeSet {
  std::vector<std::uint64_t> words;
  std::size_t size = 0;

  explicit EdgeSet(std::size_t bond_count) : words((bond_count + 63) / 64, 0) {}
  void flip(int bond) {
    words[static_cast<std::size_t>(bond) / 64] ^= 1ULL << (static_cast<std::size_t>(bond) % 64);
  }
  bool test(int bond) const {
    return (words[static_cast<std::size_t>(bond) / 64] >> (static_cast<std::size_t>(bond) % 64)) & 1ULL;
  }
  bool empty() const {
    return std::all_of(words.begin(), words.end(), [](std::uint64_t w) { return w == 0; });
  }
  int lowest() const {
    for (std::size_t i = 0; i < words.size(); ++i) {
      if (words[i]) return static_cast<int>(i * 64 + static_cast<std::size_t>(__builtin_ctzll(words[i])));
    }
    return -1;
  }
  void xor_with(const EdgeSet& other) {
    for (std::size_t i = 0; i < words.size(); ++i) words[i] ^= other.words[i];
  }
};

struct BfsTree {
  std::vector<int> dist;
  std::vector<int> parent_atom;
  std::vector<int> parent_bond;
};

BfsTree bfs(const Adjacency& adj, int root) {
  const auto n = adj.neighbours.size();
  BfsTree t{std::vector<int>(n, -1), std::vector<int>(n, -1), std::vector<int>(n, -1)};
  std::deque<int> queue{root};
  t.dist[static_cast<std::size_t>(root)] = 0;
  while (!queue.empty()) {
    const int a = queue.front();
    queue.pop_front();
    for (const auto& [nb, bond] : adj.neighbours[static_cast<std::size_t>(a)]) {
      auto& d = t.dist[static_cast<std::size_t>(nb)];
      if (d >= 0) continue;
      d = t.dist[static_cast<std::size_t>(a)] + 1;
      t.parent_atom[static_cast<std::size_t>(nb)] = a;
      t.parent_bond[static_cast<std::size_t>(nb)] = bond;
      queue.push_back(nb);
    }
  }
  return t;
}

// Walks an edge set into an atom cycle starting from its lowest-index atom.
Ring edge_set_to_ring(const EdgeSet& edges, std::span<const Bond> bonds) {
  std::vector<int> members;
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    if (edges.test(static_cast<int>(i))) members.push_back(static_cast<int>(i));
  }
  Ring ring;
  if (members.empty()) return ring;
  int start = bonds[static_cast<std::size_t>(members.front())].begin;
  for (int b : members) start = std::min({start, bonds[static_cast<std::size_t>(b)].begin, bonds[static_cast<std::size_t>(b)].end});
  std::vector<bool> used(members.size(), false);
  int current = start;
  ring.push_back(current);
  for (std::size_t step = 0; step + 1 < members.size(); ++step) {
    // Prefer the lower-index neighbour on the first step for a stable orientation.
    int best = -1;
    int best_next = -1;
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (used[k]) continue;
      const auto& b = bonds[static_cast<std::size_t>(members[k])];
      if (b.begin != current && b.end != current) continue;
      const int next = b.other(current);
      if (best < 0 || next < best_next) {
        best = static_cast<int>(k);
        best_next = next;
      }
    }
    if (best < 0) break;
    used[static_cast<std::size_t>(best)] = true;
    current = best_next;
    ring.push_back(current);
  }
  return ring;
}

}  // namespace

std::vector<bool> cyclic_bonds(std::size_t atom_count, std::span<const Bond> bonds) {
  // Tarjan bridge finding, iterative to stay safe on long chains.
  const Adjacency adj(atom_count, bonds);
  std::vector<bool> cyclic(bonds.size(), true);
  std::vector<int> disc(atom_count, -1);
  std::vector<int> low(atom_count, 0);
  int timer = 0;
  struct Frame {
    int atom;
    int via_bond;
    std::size_t next;
  };
  for (std::size_t root = 0; root < atom_count; ++root) {
    if (disc[root] >= 0) continue;
    std::vector<Frame> stack{{static_cast<int>(root), -1, 0}};
    disc[root] = low[root] = timer++;
    while (!stack.empty()) {
      auto& f = stack.back();
      const auto& nbs = adj.neighbours[static_cast<std::size_t>(f.atom)];
      if (f.next < nbs.size()) {
        const auto [nb, bond] = nbs[f.next++];
        if (bond == f.via_bond) continue;
        const auto unb = static_cast<std::size_t>(nb);
        if (disc[unb] < 0) {
          disc[unb] = low[unb] = timer++;
          stack.push_back({nb, bond, 0});
        } else {
          low[static_cast<std::size_t>(f.atom)] = std::min(low[static_cast<std::size_t>(f.atom)], disc[unb]);
        }
      } else {
        const Frame done = f;
        stack.pop_back();
        if (!stack.empty()) {
          auto& parent = stack.back();
          const auto ua = static_cast<std::size_t>(done.atom);
          const auto up = static_cast<std::size_t>(parent.atom);
          low[up] = std::min(low[up], low[ua]);
          if (low[ua] > disc[up]) cyclic[static_cast<std::size_t>(done.via_bond)] = false;
        }
      }
    }
  }
  return cyclic;
}

std::vector<Ring> perceive_rings(std::size_t atom_count, std::span<const Bond> bonds) {
  const auto cyclic = cyclic_bonds(atom_count, bonds);
  const Adjacency adj(atom_count, bonds, &cyclic);

  // Cycle rank of the cyclic subgraph equals that of the whole graph.
  std::size_t cyclic_edges = 0;
  std::vector<bool> cyclic_atom(atom_count, false);
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    if (!cyclic[i]) continue;
    ++cyclic_edges;
    cyclic_atom[static_cast<std::size_t>(bonds[i].begin)] = true;
    cyclic_atom[static_cast<std::size_t>(bonds[i].end)] = true;
  }
  if (cyclic_edges == 0) return {};
  std::size_t cyclic_atoms = 0;
  std::size_t components = 0;
  {
    std::vector<bool> seen(atom_count, false);
    for (std::size_t a = 0; a < atom_count; ++a) {
      if (!cyclic_atom[a]) continue;
      ++cyclic_atoms;
      if (seen[a]) continue;
      ++components;
      std::vector<int> stack{static_cast<int>(a)};
      seen[a] = true;
      while (!stack.empty()) {
        const int x = stack.back();
        stack.pop_back();
        for (const auto& [nb, bond] : adj.neighbours[static_cast<std::size_t>(x)]) {
          if (!seen[static_cast<std::size_t>(nb)]) {
            seen[static_cast<std::size_t>(nb)] = true;
            stack.push_back(nb);
          }
        }
      }
    }
  }
  const std::size_t rank = cyclic_edges - cyclic_atoms + components;

  // Horton candidates: for every root v and edge (x, y), the cycle formed by the
  // shortest paths v->x, v->y and the edge, when those paths meet only at v.
  struct Candidate {
    std::size_t size;
    std::size_t order;
    EdgeSet edges;
  };
  std::vector<Candidate> candidates;
  std::set<std::vector<std::uint64_t>> seen_sets;
  auto add_candidate = [&](EdgeSet&& e) {
    std::size_t count = 0;
    for (auto w : e.words) count += static_cast<std::size_t>(__builtin_popcountll(w));
    if (count < 3 || !seen_sets.insert(e.words).second) return;
    e.size = count;
    candidates.push_back({count, candidates.size(), std::move(e)});
  };

  for (std::size_t v = 0; v < atom_count; ++v) {
    if (!cyclic_atom[v]) continue;
    const BfsTree tree = bfs(adj, static_cast<int>(v));
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      if (!cyclic[i]) continue;
      const int x = bonds[i].begin;
      const int y = bonds[i].end;
      const int dx = tree.dist[static_cast<std::size_t>(x)];
      const int dy = tree.dist[static_cast<std::size_t>(y)];
      if (dx < 0 || dy < 0) continue;
      if (tree.parent_bond[static_cast<std::size_t>(x)] == static_cast<int>(i) ||
          tree.parent_bond[static_cast<std::size_t>(y)] == static_cast<int>(i)) {
        continue;
      }
      std::vector<bool> on_path(atom_count, false);
      EdgeSet edges(bonds.size());
      for (int a = x; a != static_cast<int>(v); a = tree.parent_atom[static_cast<std::size_t>(a)]) {
        on_path[static_cast<std::size_t>(a)] = true;
        edges.flip(tree.parent_bond[static_cast<std::size_t>(a)]);
      }
      bool disjoint = true;
      for (int a = y; a != static_cast<int>(v); a = tree.parent_atom[static_cast<std::size_t>(a)]) {
        if (on_path[static_cast<std::size_t>(a)]) {
          disjoint = false;
          break;
        }
        edges.flip(tree.parent_bond[static_cast<std::size_t>(a)]);
      }
      if (!disjoint) continue;
      edges.flip(static_cast<int>(i));
      add_candidate(std::move(edges));
    }
  }

  // Fundamental cycles of a spanning forest guarantee full rank.
  {
    std::vector<bool> in_tree(bonds.size(), false);
    std::vector<bool> reached(atom_count, false);
    std::vector<BfsTree> trees;
    std::vector<int> tree_of(atom_count, -1);
    for (std::size_t v = 0; v < atom_count; ++v) {
      if (!cyclic_atom[v] || reached[v]) continue;
      trees.push_back(bfs(adj, static_cast<int>(v)));
      for (std::size_t a = 0; a < atom_count; ++a) {
        if (trees.back().dist[a] >= 0) {
          reached[a] = true;
          tree_of[a] = static_cast<int>(trees.size() - 1);
          if (trees.back().parent_bond[a] >= 0) in_tree[static_cast<std::size_t>(trees.back().parent_bond[a])] = true;
        }
      }
    }
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      if (!cyclic[i] || in_tree[i]) continue;
      const auto& t = trees[static_cast<std::size_t>(tree_of[static_cast<std::size_t>(bonds[i].begin)])];
      EdgeSet edges(bonds.size());
      for (int a = bonds[i].begin; t.parent_atom[static_cast<std::size_t>(a)] >= 0; a = t.parent_atom[static_cast<std::size_t>(a)]) {
        edges.flip(t.parent_bond[static_cast<std::size_t>(a)]);
      }
      for (int a = bonds[i].end; t.parent_atom[static_cast<std::size_t>(a)] >= 0; a = t.parent_atom[static_cast<std::size_t>(a)]) {
        edges.flip(t.parent_bond[static_cast<std::size_t>(a)]);
      }
      edges.flip(static_cast<int>(i));
      add_candidate(std::move(edges));
    }
  }

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& a, const Candidate& b) { return a.size < b.size; });

  // Greedy GF(2) independence test against a reduced basis.
  std::vector<EdgeSet> reduced;
  std::vector<Ring> rings;
  for (const auto& c : candidates) {
    if (rings.size() == rank) break;
    EdgeSet r = c.edges;
    for (const auto& basis : reduced) {
      if (r.test(basis.lowest())) r.xor_with(basis);
    }
    if (r.empty()) continue;
    // Keep the reduced basis in echelon form keyed on distinct pivots.
    const int pivot = r.lowest();
    for (auto& basis : reduced) {
      if (basis.test(pivot)) basis.xor_with(r);
    }
    reduced.push_back(std::move(r));
    rings.push_back(edge_set_to_ring(c.edges, bonds));
  }
  return rings;
}

}  // namespace molrefine
