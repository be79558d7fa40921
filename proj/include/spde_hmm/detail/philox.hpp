#pragma once

// Philox4x32-10 counter-based generator (Salmon, Moraes, Dror, Shaw, SC'11).
// Stateless: the output block is a pure function of (key, counter).

#include <array>
#include <cstdint>

namespace spde_hmm::detail {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

inline void philox_round(PhiloxCounter& ctr, const PhiloxKey& key) {
  constexpr std::uint64_t kMulA = 0xD2511F53u;
  constexpr std::uint64_t kMulB = 0xCD9E8D57u;
  const std::uint64_t p0 = kMulA * ctr[0];
  const std::uint64_t p1 = kMulB * ctr[2];
  const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const auto lo0 = static_cast<std::uint32_t>(p0);
  const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const auto lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

inline PhiloxCounter philox4x32_10(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint32_t kWeylA = 0x9E3779B9u;
  constexpr std::uint32_t kWeylB = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeylA;
      key[1] += kWeylB;
    }
    philox_round(ctr, key);
  }
  return ctr;
}

}  // namespace spde_hmm::detail
