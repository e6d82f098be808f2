// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "molrefine/molgraph.hpp"

namespace molrefine {

inline constexpr int kDefaultRadius = 2;
inline constexpr int kDefaultBits = 2048;

/// Folded circular-environment bit vector. Comparable only with fingerprints of
/// the same width and radius.
class Fingerprint {
 public:
  /// nbits must be a power of two >= 64, radius in 0..8; throws UsageError otherwise.
  Fingerprint(int nbits, int radius);

  int nbits() const { return nbits_; }
  int radius() const { return radius_; }
  bool test(std::size_t bit) const { return (words_[bit / 64] >> (bit % 64)) & 1U; }
  void set(std::size_t bit) { words_[bit / 64] |= std::uint64_t{1} << (bit % 64); }
  int popcount() const;
  std::vector<std::size_t> on_bits() const;

  /// Raw bit vector, little-endian (bit i is bit i%8 of byte i/8), base64-encoded.
  std::string to_base64() const;
  /// Throws UsageError when the payload does not hold exactly nbits bits.
  static Fingerprint from_base64(std::string_view text, int nbits, int radius);

  bool operator==(const Fingerprint&) const = default;

 private:
  friend double tanimoto(const Fingerprint& a, const Fingerprint& b);

  int nbits_;
  int radius_;
  std::vector<std::uint64_t> words_;
};

/// Environment hash of every atom at every radius 0..radius, in that order
/// (atom-major within a radius).
std::vector<std::uint64_t> morgan_environment_hashes(const MolGraph& mol, int radius);

Fingerprint morgan_fingerprint(const MolGraph& mol, int radius = kDefaultRadius, int nbits = kDefaultBits);

/// |a & b| / |a | b|; 1.0 when both are empty. Throws UsageError on a parameter mismatch.
double tanimoto(const Fingerprint& a, const Fingerprint& b);

}  // namespace molrefine
