// SPDX-License-Identifier: Apache-2.0
#include "aromaticity.hpp"

#include <algorithm>
#include <numeric>

#include "molrefine/element.hpp"

namespace molrefine::detail {
namespace {

enum class Donor { kNone, kVacant, kOne, kTwo };

int default_valence(int element) {
  switch (element) {
    case 5: return 3;
    case 6: return 4;
    case 7:
    case 15:
    case 33: return 3;
    case 8:
    case 16:
    case 34:
    case 52: return 2;
    default: return -1;
  }
}

// Outer-electron count first, then lighter-is-more-electronegative.
bool more_electronegative(int a, int b) {
  const int ea = element_info(a).outer_electrons;
  const int eb = element_info(b).outer_electrons;
  if (ea != eb) return ea > eb;
  return a < b;
}

class DonorClassifier {
 public:
  explicit DonorClassifier(const AromaticityInput& in) : in_(in) {}

  Donor classify(int atom) const {
    const auto& at = in_.atoms[static_cast<std::size_t>(atom)];
    const int dv = default_valence(at.element);
    if (dv <= 1) return Donor::kNone;
    const auto& inc = in_.incident[static_cast<std::size_t>(atom)];
    const int degree = static_cast<int>(inc.size());
    const int total_degree = degree + in_.total_h[static_cast<std::size_t>(atom)];
    if (total_degree > 3) return Donor::kNone;

    int multiple = 0;
    int order_sum = 0;
    int cyclic_multiple = 0;
    int acyclic_partner = -1;
    for (int b : inc) {
      const int order = in_.kekule[static_cast<std::size_t>(b)];
      order_sum += order;
      if (order < 2) continue;
      ++multiple;
      if (in_.bond_ring_count[static_cast<std::size_t>(b)] > 0) {
        ++cyclic_multiple;
      } else {
        acyclic_partner = in_.bonds[static_cast<std::size_t>(b)].other(atom);
      }
    }
    if (multiple > 1) return Donor::kNone;

    int lone = element_info(at.element).outer_electrons - dv;
    lone = std::max(lone - at.formal_charge, 0);
    int electrons = (dv - total_degree) + lone;
    if (electrons > 1 && order_sum - degree > 1) electrons = 1;

    if (electrons < 0) return Donor::kNone;
    if (electrons == 0) {
      if (acyclic_partner >= 0) return Donor::kVacant;
      if (cyclic_multiple > 0) return Donor::kOne;
      return Donor::kNone;
    }
    if (electrons == 1) {
      if (acyclic_partner >= 0) {
        const int partner = in_.atoms[static_cast<std::size_t>(acyclic_partner)].element;
        return more_electronegative(partner, at.element) ? Donor::kVacant : Donor::kOne;
      }
      if (multiple > 0) return Donor::kOne;
      if (at.formal_charge == 1) return Donor::kVacant;
      return Donor::kNone;
    }
    if (cyclic_multiple > 0) return Donor::kOne;
    return Donor::kTwo;
  }

 private:
  const AromaticityInput& in_;
};

int electron_count(Donor d) {
  switch (d) {
    case Donor::kOne: return 1;
    case Donor::kTwo: return 2;
    default: return 0;
  }
}

}  // namespace

AromaticityFlags perceive_aromaticity(const AromaticityInput& in) {
  AromaticityFlags flags{std::vector<std::uint8_t>(in.atoms.size(), 0),
                         std::vector<std::uint8_t>(in.bonds.size(), 0)};
  if (in.rings.empty()) return flags;

  const DonorClassifier classifier(in);
  std::vector<Donor> donors(in.atoms.size(), Donor::kNone);
  for (std::size_t a = 0; a < in.atoms.size(); ++a) donors[a] = classifier.classify(static_cast<int>(a));

  // Candidate rings: every member can contribute to a pi system.
  std::vector<std::size_t> candidates;
  for (std::size_t r = 0; r < in.rings.size(); ++r) {
    const auto& ring = in.rings[r];
    if (std::all_of(ring.begin(), ring.end(), [&](int a) { return donors[static_cast<std::size_t>(a)] != Donor::kNone; })) {
      candidates.push_back(r);
    }
  }
  if (candidates.empty()) return flags;

  auto ring_bonds = [&](std::size_t r) {
    std::vector<int> out;
    const auto& ring = in.rings[r];
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const int a = ring[i];
      const int b = ring[(i + 1) % ring.size()];
      for (int bond : in.incident[static_cast<std::size_t>(a)]) {
        if (in.bonds[static_cast<std::size_t>(bond)].other(a) == b) {
          out.push_back(bond);
          break;
        }
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  std::vector<std::vector<int>> bonds_of(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) bonds_of[i] = ring_bonds(candidates[i]);

  auto share_bond = [&](std::size_t i, std::size_t j) {
    std::vector<int> common;
    std::set_intersection(bonds_of[i].begin(), bonds_of[i].end(), bonds_of[j].begin(), bonds_of[j].end(),
                          std::back_inserter(common));
    return !common.empty();
  };

  // Group candidate rings into bond-fused systems.
  std::vector<int> system(candidates.size(), -1);
  int systems = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (system[i] >= 0) continue;
    std::vector<std::size_t> stack{i};
    system[i] = systems;
    while (!stack.empty()) {
      const auto x = stack.back();
      stack.pop_back();
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        if (system[j] < 0 && share_bond(x, j)) {
          system[j] = systems;
          stack.push_back(j);
        }
      }
    }
    ++systems;
  }

  auto mark = [&](const std::vector<std::size_t>& members) {
    for (auto m : members) {
      for (int a : in.rings[candidates[m]]) flags.atoms[static_cast<std::size_t>(a)] = 1;
      for (int b : bonds_of[m]) flags.bonds[static_cast<std::size_t>(b)] = 1;
    }
  };
  auto huckel = [&](const std::vector<std::size_t>& members) {
    std::vector<int> atoms;
    for (auto m : members) {
      const auto& ring = in.rings[candidates[m]];
      atoms.insert(atoms.end(), ring.begin(), ring.end());
    }
    std::sort(atoms.begin(), atoms.end());
    atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
    int electrons = 0;
    for (int a : atoms) electrons += electron_count(donors[static_cast<std::size_t>(a)]);
    return electrons >= 2 && (electrons - 2) % 4 == 0;
  };

  constexpr std::size_t kMaxEnumeratedRings = 10;
  for (int s = 0; s < systems; ++s) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (system[i] == s) members.push_back(i);
    }
    std::vector<bool> done(members.size(), false);
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (huckel({members[i]})) {
        mark({members[i]});
        done[i] = true;
      }
    }
    if (members.size() < 2) continue;
    const std::size_t max_size = members.size() <= kMaxEnumeratedRings ? members.size() : 2;
    for (std::size_t size = 2; size <= max_size; ++size) {
      if (std::all_of(done.begin(), done.end(), [](bool d) { return d; })) break;
      // Enumerate combinations of `size` rings in lexicographic order.
      std::vector<std::size_t> pick(size);
      std::iota(pick.begin(), pick.end(), 0);
      while (true) {
        // Skip combinations whose rings are all already aromatic.
        bool useful = false;
        for (auto p : pick) useful = useful || !done[p];
        bool connected = false;
        if (useful) {
          std::vector<bool> reached(size, false);
          std::vector<std::size_t> stack{0};
          reached[0] = true;
          while (!stack.empty()) {
            const auto x = stack.back();
            stack.pop_back();
            for (std::size_t y = 0; y < size; ++y) {
              if (!reached[y] && share_bond(members[pick[x]], members[pick[y]])) {
                reached[y] = true;
                stack.push_back(y);
              }
            }
          }
          connected = std::all_of(reached.begin(), reached.end(), [](bool r) { return r; });
        }
        if (connected) {
          std::vector<std::size_t> combo;
          for (auto p : pick) combo.push_back(members[p]);
          if (huckel(combo)) {
            mark(combo);
            for (auto p : pick) done[p] = true;
          }
        }
        // Advance the combination.
        std::size_t k = size;
        while (k > 0 && pick[k - 1] == members.size() - size + (k - 1)) --k;
        if (k == 0) break;
        ++pick[k - 1];
        for (std::size_t j = k; j < size; ++j) pick[j] = pick[j - 1] + 1;
      }
    }
  }
  return flags;
}

}  // namespace molrefine::detail
