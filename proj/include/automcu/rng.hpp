// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic random source. std::mt19937_64 has a standard-mandated
// output sequence, but std::uniform_int_distribution does not, so bounded
// draws are implemented here with plain modulo reduction. The tiny modulo
// bias is irrelevant for architecture sampling and a fair price for
// bit-identical behavior everywhere.

#ifndef AUTOMCU_RNG_HPP
#define AUTOMCU_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace automcu::util {

class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform-ish draw in [lo, hi], inclusive. Requires lo <= hi.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  bool next_bool() { return (engine_() & 1ull) != 0; }

  template <typename T>
  const T& pick(const std::vector<T>& choices) {
    return choices[static_cast<std::size_t>(
        next_int(0, static_cast<std::int64_t>(choices.size()) - 1))];
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace automcu::util

#endif  // AUTOMCU_RNG_HPP
