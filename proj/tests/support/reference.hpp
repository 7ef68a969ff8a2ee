#pragma once

// Test-only reference implementations, independent of the library's readers
// and builders. The naive codec works group by group straight from the word
// layout definition and is what library results are checked against.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace ref {

constexpr uint32_t kGroup = 31;
constexpr uint32_t kFillFlag = 0x8000'0000u;
constexpr uint32_t kFillVal = 0x4000'0000u;
constexpr uint32_t kRunMask = 0x3FFF'FFFFu;
constexpr uint32_t kPayload = 0x7FFF'FFFFu;

using Bits = std::vector<uint8_t>;

/// Group-by-group encoder: uniform complete groups become fills (run >= 1),
/// adjacent equal fills merge, a partial trailing group stays literal.
inline std::vector<uint32_t> naive_encode(const Bits& bits, uint64_t* bit_len_out) {
  std::vector<uint32_t> words;
  uint64_t n = bits.size();
  uint64_t g = 0;
  for (; (g + 1) * kGroup <= n; ++g) {
    uint32_t payload = 0;
    for (uint32_t k = 0; k < kGroup; ++k) {
      payload |= static_cast<uint32_t>(bits[g * kGroup + k] & 1) << k;
    }
    if (payload == 0 || payload == kPayload) {
      bool v = payload != 0;
      if (!words.empty() && (words.back() & kFillFlag) && ((words.back() & kFillVal) != 0) == v &&
          (words.back() & kRunMask) < kRunMask) {
        words.back() += 1;
      } else {
        words.push_back(kFillFlag | (v ? kFillVal : 0) | 1u);
      }
    } else {
      words.push_back(payload);
    }
  }
  if (g * kGroup < n) {
    uint32_t payload = 0;
    for (uint64_t i = g * kGroup; i < n; ++i) {
      payload |= static_cast<uint32_t>(bits[i] & 1) << (i - g * kGroup);
    }
    words.push_back(payload);
  }
  if (bit_len_out) *bit_len_out = n;
  return words;
}

inline Bits naive_decode(const std::vector<uint32_t>& words, uint64_t bit_len) {
  Bits out;
  out.reserve(bit_len);
  for (uint32_t w : words) {
    if (w & kFillFlag) {
      uint8_t v = (w & kFillVal) ? 1 : 0;
      uint64_t run = w & kRunMask;
      for (uint64_t i = 0; i < run * kGroup && out.size() < bit_len; ++i) out.push_back(v);
    } else {
      for (uint32_t k = 0; k < kGroup && out.size() < bit_len; ++k) {
        out.push_back(static_cast<uint8_t>((w >> k) & 1));
      }
    }
  }
  out.resize(bit_len, 0);
  return out;
}

/// Structural canonicality: no adjacent same-value fills, no complete uniform
/// literal group, trailing partial group (if any) is a literal.
inline bool is_canonical(const std::vector<uint32_t>& words, uint64_t bit_len) {
  uint64_t total_groups = (bit_len + kGroup - 1) / kGroup;
  bool has_tail = bit_len % kGroup != 0;
  uint64_t g = 0;
  for (size_t i = 0; i < words.size(); ++i) {
    uint32_t w = words[i];
    if (w & kFillFlag) {
      uint64_t run = w & kRunMask;
      if (run == 0) return false;
      if (i + 1 < words.size() && (words[i + 1] & kFillFlag) &&
          ((words[i + 1] & kFillVal) == (w & kFillVal))) {
        return false;  // adjacent same-value fills
      }
      if (has_tail && g + run >= total_groups) return false;  // fill covering tail
      g += run;
    } else {
      bool is_tail_group = has_tail && g == total_groups - 1;
      uint32_t payload = w & kPayload;
      if (!is_tail_group && (payload == 0 || payload == kPayload)) return false;
      if (is_tail_group) {
        uint32_t used = static_cast<uint32_t>(bit_len % kGroup);
        if ((payload & ~((1u << used) - 1u)) != 0) return false;  // nonzero padding
      }
      g += 1;
    }
  }
  return g == total_groups;
}

/// Random bit string with ones density ~d.
inline Bits random_bits(std::mt19937_64& rng, uint64_t n, double density) {
  Bits out(n, 0);
  if (density <= 0) return out;
  std::bernoulli_distribution one(density);
  if (density >= 0.01) {
    for (uint64_t i = 0; i < n; ++i) out[i] = one(rng) ? 1 : 0;
  } else {
    // Geometric skips for sparse strings.
    std::geometric_distribution<uint64_t> gap(density);
    uint64_t i = gap(rng);
    while (i < n) {
      out[i] = 1;
      i += 1 + gap(rng);
    }
  }
  return out;
}

}  // namespace ref
