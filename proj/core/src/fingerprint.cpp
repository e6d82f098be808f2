// SPDX-License-Identifier: Apache-2.0
#include "molrefine/fingerprint.hpp"

#include <algorithm>
#include <bit>

#include <fmt/format.h>

#include "molrefine/digest.hpp"
#include "molrefine/errors.hpp"
#include "molrefine/hash.hpp"

namespace molrefine {
namespace {

std::uint32_t bond_label(const MolGraph& mol, int bond) {
  return mol.bond_aromatic(bond) ? 4U : static_cast<std::uint32_t>(mol.kekule_order(bond));
}

}  // namespace

Fingerprint::Fingerprint(int nbits, int radius) : nbits_(nbits), radius_(radius) {
  if (nbits < 64 || !std::has_single_bit(static_cast<unsigned>(nbits))) {
    throw UsageError(fmt::format("fingerprint width {} is not a power of two >= 64", nbits));
  }
  if (radius < 0 || radius > 8) throw UsageError(fmt::format("fingerprint radius {} outside 0..8", radius));
  words_.assign(static_cast<std::size_t>(nbits) / 64, 0);
}

int Fingerprint::popcount() const {
  int n = 0;
  for (auto w : words_) n += std::popcount(w);
  return n;
}

std::vector<std::size_t> Fingerprint::on_bits() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < static_cast<std::size_t>(nbits_); ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

std::string Fingerprint::to_base64() const {
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(nbits_) / 8);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = static_cast<std::uint8_t>(words_[i / 8] >> (8 * (i % 8)));
  }
  return base64_encode(bytes);
}

Fingerprint Fingerprint::from_base64(std::string_view text, int nbits, int radius) {
  Fingerprint fp(nbits, radius);
  auto bytes = base64_decode(text);
  if (!bytes || bytes->size() * 8 != static_cast<std::size_t>(nbits)) {
    throw UsageError(fmt::format("fingerprint payload does not hold {} bits", nbits));
  }
  for (std::size_t i = 0; i < bytes->size(); ++i) {
    fp.words_[i / 8] |= static_cast<std::uint64_t>((*bytes)[i]) << (8 * (i % 8));
  }
  return fp;
}

std::vector<std::uint64_t> morgan_environment_hashes(const MolGraph& mol, int radius) {
  const auto n = mol.atom_count();
  std::vector<std::uint64_t> codes(n);
  for (int a = 0; a < static_cast<int>(n); ++a) {
    const auto& atom = mol.atom(a);
    StableHasher h;
    h.add(static_cast<std::int32_t>(atom.element))
        .add(static_cast<std::int32_t>(mol.degree(a)))
        .add(static_cast<std::int32_t>(atom.formal_charge))
        .add(static_cast<std::int32_t>(mol.total_h(a)))
        .add(static_cast<std::uint32_t>(mol.atom_in_ring(a)))
        .add(static_cast<std::uint32_t>(mol.aromatic(a)));
    codes[static_cast<std::size_t>(a)] = h.digest();
  }
  std::vector<std::uint64_t> out(codes);
  std::vector<std::pair<std::uint32_t, std::uint64_t>> neighbours;
  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint64_t> next(n);
    for (int a = 0; a < static_cast<int>(n); ++a) {
      neighbours.clear();
      for (int b : mol.incident_bonds(a)) {
        neighbours.emplace_back(bond_label(mol, b), codes[static_cast<std::size_t>(mol.bond(b).other(a))]);
      }
      std::sort(neighbours.begin(), neighbours.end());
      StableHasher h;
      h.add(static_cast<std::int32_t>(r)).add(codes[static_cast<std::size_t>(a)]);
      for (const auto& [label, code] : neighbours) h.add(label).add(code);
      next[static_cast<std::size_t>(a)] = h.digest();
    }
    codes = std::move(next);
    out.insert(out.end(), codes.begin(), codes.end());
  }
  return out;
}

Fingerprint morgan_fingerprint(const MolGraph& mol, int radius, int nbits) {
  Fingerprint fp(nbits, radius);
  for (auto h : morgan_environment_hashes(mol, radius)) fp.set(h & static_cast<std::uint64_t>(nbits - 1));
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits_ != b.nbits_ || a.radius_ != b.radius_) {
    throw UsageError(fmt::format("fingerprint mismatch: {} bits radius {} vs {} bits radius {}", a.nbits_, a.radius_,
                                 b.nbits_, b.radius_));
  }
  int both = 0;
  int either = 0;
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    both += std::popcount(a.words_[i] & b.words_[i]);
    either += std::popcount(a.words_[i] | b.words_[i]);
  }
  return either == 0 ? 1.0 : static_cast<double>(both) / either;
}

}  // namespace molrefine
