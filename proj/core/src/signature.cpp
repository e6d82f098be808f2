// SPDX-License-Identifier: Apache-2.0
#include "molrefine/signature.hpp"

#include <algorithm>
#include <unordered_set>

#include <fmt/format.h>

#include "molrefine/hash.hpp"

namespace molrefine {
namespace {

std::size_t distinct(const std::vector<std::uint64_t>& codes) {
  return std::unordered_set<std::uint64_t>(codes.begin(), codes.end()).size();
}

std::uint32_t bond_label(const MolGraph& mol, int bond) {
  return mol.bond_aromatic(bond) ? 4U : static_cast<std::uint32_t>(mol.kekule_order(bond));
}

}  // namespace

std::vector<std::uint64_t> refined_atom_codes(const MolGraph& mol) {
  const int n = static_cast<int>(mol.atom_count());
  std::vector<std::uint64_t> codes(static_cast<std::size_t>(n));
  for (int a = 0; a < n; ++a) {
    const auto& atom = mol.atom(a);
    StableHasher h;
    h.add(static_cast<std::int32_t>(atom.element))
        .add(static_cast<std::int32_t>(atom.formal_charge))
        .add(static_cast<std::int32_t>(mol.total_h(a)))
        .add(static_cast<std::int32_t>(atom.isotope.value_or(-1)))
        .add(static_cast<std::uint32_t>(mol.aromatic(a)))
        .add(static_cast<std::int32_t>(mol.degree(a)))
        .add(static_cast<std::uint32_t>(mol.atom_in_ring(a)));
    codes[static_cast<std::size_t>(a)] = h.digest();
  }

  std::size_t classes = distinct(codes);
  std::vector<std::pair<std::uint32_t, std::uint64_t>> neighbours;
  for (int round = 0; round < n; ++round) {
    std::vector<std::uint64_t> next(codes.size());
    for (int a = 0; a < n; ++a) {
      neighbours.clear();
      for (int b : mol.incident_bonds(a)) {
        neighbours.emplace_back(bond_label(mol, b), codes[static_cast<std::size_t>(mol.bond(b).other(a))]);
      }
      std::sort(neighbours.begin(), neighbours.end());
      StableHasher h;
      h.add(codes[static_cast<std::size_t>(a)]);
      for (const auto& [label, code] : neighbours) h.add(label).add(code);
      next[static_cast<std::size_t>(a)] = h.digest();
    }
    const std::size_t next_classes = distinct(next);
    codes = std::move(next);
    if (next_classes <= classes) break;
    classes = next_classes;
  }
  return codes;
}

std::string graph_signature(const MolGraph& mol) {
  auto codes = refined_atom_codes(mol);
  std::sort(codes.begin(), codes.end());
  StableHasher h;
  h.add(static_cast<std::uint64_t>(mol.atom_count())).add(static_cast<std::uint64_t>(mol.bond_count()));
  for (auto c : codes) h.add(c);
  return fmt::format("{:016x}", h.digest());
}

}  // namespace molrefine
