// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stable hashing and seed derivation. Everything here is fully specified
// arithmetic on fixed-width integers, so results are identical across
// platforms, compilers, and standard-library implementations. That property
// is load-bearing: model identifiers and seeded runs must reproduce exactly.

#ifndef AUTOMCU_HASH_HPP
#define AUTOMCU_HASH_HPP

#include <cstdint>
#include <string>
#include <string_view>

namespace automcu::util {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ull;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

// FNV-1a over a byte range, continuing from a previous state.
constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t state = kFnvOffsetBasis) {
  for (unsigned char c : bytes) {
    state ^= static_cast<std::uint64_t>(c);
    state *= kFnvPrime;
  }
  return state;
}

// Folds an integer into an FNV-1a state as 8 little-endian bytes.
constexpr std::uint64_t fnv1a64_u64(std::uint64_t value,
                                    std::uint64_t state = kFnvOffsetBasis) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffull;
    state *= kFnvPrime;
  }
  return state;
}

// Lowercase hex rendering of the top `digits` nibbles (most significant
// first), as used in model identifiers.
std::string hex_prefix(std::uint64_t value, int digits);

// splitmix64 finalizer; a good integer mixer for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a counter.
// Incrementing the counter never perturbs streams at other counters.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  return mix64(master ^ mix64(counter + 0x51ed2701a3c5e871ull));
}

}  // namespace automcu::util

#endif  // AUTOMCU_HASH_HPP
