// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace molrefine {

/// FNV-1a 64 over little-endian words, seeded with the standard offset basis,
/// finished with the MurmurHash3 fmix64 avalanche step. Used wherever hashes
/// end up on disk (fingerprints, signatures), so it must never change.
class StableHasher {
 public:
  static constexpr std::uint64_t kOffsetBasis = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  StableHasher& add_byte(std::uint8_t byte) {
    state_ = (state_ ^ byte) * kPrime;
    return *this;
  }
  StableHasher& add(std::uint32_t word) {
    for (int i = 0; i < 4; ++i) add_byte(static_cast<std::uint8_t>(word >> (8 * i)));
    return *this;
  }
  StableHasher& add(std::uint64_t word) {
    for (int i = 0; i < 8; ++i) add_byte(static_cast<std::uint8_t>(word >> (8 * i)));
    return *this;
  }
  StableHasher& add(std::int32_t word) { return add(static_cast<std::uint32_t>(word)); }
  StableHasher& add(std::string_view text) {
    for (char c : text) add_byte(static_cast<std::uint8_t>(c));
    return *this;
  }

  std::uint64_t digest() const { return fmix64(state_); }

  static constexpr std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
  }

 private:
  std::uint64_t state_ = kOffsetBasis;
};

}  // namespace molrefine
