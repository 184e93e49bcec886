// Copyright (c) 2026 The AutoMCU Authors
// SPDX-License-Identifier: Apache-2.0

#include "automcu/hash.hpp"

namespace automcu::util {

std::string hex_prefix(std::uint64_t value, int digits) {
  static const char* kHex = "0123456789abcdef";
  std::string out;
  out.reserve(static_cast<std::size_t>(digits));
  for (int i = 0; i < digits; ++i) {
    const int shift = 64 - 4 * (i + 1);
    out.push_back(kHex[(value >> shift) & 0xf]);
  }
  return out;
}

}  // namespace automcu::util
