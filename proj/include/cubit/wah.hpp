#pragma once

// Word-Aligned Hybrid (WAH) run-length compression over 31-bit groups.
//
// Word layout (32-bit):
//   MSB = 0  ->  literal word; bits 0..30 hold one 31-bit group verbatim,
//                payload bit k holds logical bit 31*g + k of group g.
//   MSB = 1  ->  fill word; bit 30 is the fill value, bits 0..29 hold the
//                run length in complete 31-bit groups (>= 1).
//
// Canonical form: every complete group that is all-0 or all-1 lives inside a
// fill word, adjacent fills of equal value are merged, and a trailing partial
// group (bit_len % 31 != 0) is always a literal word with zero padding.
// Canonical form is a pure function of the logical bit string, so logical
// equality can be tested structurally.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "cubit/errors.hpp"

namespace cubit {

inline constexpr uint32_t kGroupBits = 31;
inline constexpr uint32_t kFillFlag = 0x8000'0000u;
inline constexpr uint32_t kFillValueBit = 0x4000'0000u;
inline constexpr uint32_t kRunMask = 0x3FFF'FFFFu;
inline constexpr uint32_t kPayloadMask = 0x7FFF'FFFFu;

constexpr bool word_is_fill(uint32_t w) { return (w & kFillFlag) != 0; }
constexpr bool fill_value(uint32_t w) { return (w & kFillValueBit) != 0; }
constexpr uint32_t fill_run(uint32_t w) { return w & kRunMask; }
constexpr uint32_t make_fill(bool value, uint32_t run) {
  return kFillFlag | (value ? kFillValueBit : 0u) | run;
}
constexpr uint32_t make_literal(uint32_t payload) { return payload & kPayloadMask; }

class WahBitvector {
 public:
  WahBitvector() = default;
  WahBitvector(std::vector<uint32_t> words, uint64_t bit_len)
      : words_(std::move(words)), bit_len_(bit_len) {}

  uint64_t bit_len() const { return bit_len_; }
  bool empty() const { return bit_len_ == 0; }
  const std::vector<uint32_t>& words() const { return words_; }

  bool get_bit(uint64_t i) const;
  uint64_t count_ones() const;
  double density() const {
    return bit_len_ == 0 ? 0.0 : static_cast<double>(count_ones()) / static_cast<double>(bit_len_);
  }

  /// Little-endian wire form: u64 bit_len followed by u32 words.
  std::vector<uint8_t> serialize() const;
  static WahBitvector deserialize(std::span<const uint8_t> bytes);

  friend bool operator==(const WahBitvector& a, const WahBitvector& b) {
    return a.bit_len_ == b.bit_len_ && a.words_ == b.words_;
  }

 private:
  std::vector<uint32_t> words_;
  uint64_t bit_len_ = 0;
};

/// Streaming canonicalizing encoder. Feed complete groups (or fills of
/// complete groups) in order, optionally ending with one partial group.
class WahBuilder {
 public:
  void add_group(uint32_t payload) {
    payload &= kPayloadMask;
    if (payload == 0) {
      add_fill(false, 1);
    } else if (payload == kPayloadMask) {
      add_fill(true, 1);
    } else {
      words_.push_back(make_literal(payload));
      bit_len_ += kGroupBits;
    }
  }

  void add_fill(bool value, uint64_t groups) {
    if (groups == 0) return;
    bit_len_ += groups * kGroupBits;
    if (!words_.empty() && word_is_fill(words_.back()) && fill_value(words_.back()) == value) {
      uint64_t room = kRunMask - fill_run(words_.back());
      uint64_t take = groups < room ? groups : room;
      words_.back() += static_cast<uint32_t>(take);
      groups -= take;
    }
    while (groups > 0) {
      uint32_t take = groups > kRunMask ? kRunMask : static_cast<uint32_t>(groups);
      words_.push_back(make_fill(value, take));
      groups -= take;
    }
  }

  /// Final partial group; `used` in [1, 31). Padding bits must be zero.
  void add_tail(uint32_t payload, uint32_t used) {
    payload &= (1u << used) - 1u;
    words_.push_back(make_literal(payload));
    bit_len_ += used;
  }

  WahBitvector finish() { return WahBitvector(std::move(words_), bit_len_); }

 private:
  std::vector<uint32_t> words_;
  uint64_t bit_len_ = 0;
};

/// Group-granular cursor over a compressed word stream. Groups are yielded in
/// order; a trailing partial group appears as a literal whose padding is zero.
class WahReader {
 public:
  explicit WahReader(const WahBitvector& v) : words_(v.words()), bit_len_(v.bit_len()) {
    total_groups_ = (bit_len_ + kGroupBits - 1) / kGroupBits;
    load();
  }

  bool done() const { return group_pos_ >= total_groups_; }
  uint64_t group_pos() const { return group_pos_; }
  uint64_t total_groups() const { return total_groups_; }

  bool at_fill() const { return is_fill_; }
  bool value() const { return fill_value_; }
  /// Groups remaining in the current run (1 for a literal).
  uint64_t run_left() const { return run_left_; }
  uint32_t payload() const { return is_fill_ ? (fill_value_ ? kPayloadMask : 0u) : payload_; }

  /// Consume k groups from the current run; k <= run_left().
  void advance(uint64_t k) {
    run_left_ -= k;
    group_pos_ += k;
    if (run_left_ == 0) {
      ++idx_;
      load();
    }
  }

 private:
  void load() {
    while (idx_ < words_.size()) {
      uint32_t w = words_[idx_];
      if (word_is_fill(w)) {
        uint32_t run = fill_run(w);
        if (run == 0) throw CodecError("WAH fill word with zero run length");
        is_fill_ = true;
        fill_value_ = fill_value(w);
        run_left_ = run;
        return;
      }
      is_fill_ = false;
      payload_ = w & kPayloadMask;
      run_left_ = 1;
      return;
    }
    // Word stream exhausted: the cursor must sit exactly at total_groups_.
    if (group_pos_ != total_groups_) {
      throw CodecError("WAH word stream shorter than bit_len");
    }
    run_left_ = 0;
  }

  const std::vector<uint32_t>& words_;
  uint64_t bit_len_ = 0;
  uint64_t total_groups_ = 0;
  size_t idx_ = 0;
  uint64_t group_pos_ = 0;
  uint64_t run_left_ = 0;
  bool is_fill_ = false;
  bool fill_value_ = false;
  uint32_t payload_ = 0;
};

namespace detail {

inline uint32_t tail_used_bits(uint64_t bit_len) {
  uint32_t r = static_cast<uint32_t>(bit_len % kGroupBits);
  return r;  // 0 means the last group is complete
}

/// Validate coverage: sum of group widths must land in [bit_len, bit_len+31).
inline void check_coverage(const WahBitvector& v) {
  uint64_t groups = 0;
  for (uint32_t w : v.words()) {
    if (word_is_fill(w)) {
      if (fill_run(w) == 0) throw CodecError("WAH fill word with zero run length");
      groups += fill_run(w);
    } else {
      groups += 1;
    }
  }
  uint64_t covered = groups * kGroupBits;
  if (covered < v.bit_len() || (v.bit_len() > 0 && covered >= v.bit_len() + kGroupBits) ||
      (v.bit_len() == 0 && covered != 0)) {
    throw CodecError("WAH word coverage inconsistent with bit_len");
  }
}

}  // namespace detail

inline bool WahBitvector::get_bit(uint64_t i) const {
  if (i >= bit_len_) throw RangeError("get_bit: index past bit_len");
  uint64_t g = i / kGroupBits;
  uint32_t off = static_cast<uint32_t>(i % kGroupBits);
  uint64_t pos = 0;
  for (uint32_t w : words_) {
    if (word_is_fill(w)) {
      uint32_t run = fill_run(w);
      if (run == 0) throw CodecError("WAH fill word with zero run length");
      if (g < pos + run) return fill_value(w);
      pos += run;
    } else {
      if (g == pos) return ((w >> off) & 1u) != 0;
      ++pos;
    }
  }
  throw CodecError("WAH word stream shorter than bit_len");
}

inline uint64_t WahBitvector::count_ones() const {
  uint64_t ones = 0;
  uint64_t bit_pos = 0;
  for (uint32_t w : words_) {
    if (word_is_fill(w)) {
      uint64_t span = static_cast<uint64_t>(fill_run(w)) * kGroupBits;
      if (fill_value(w)) {
        uint64_t usable = bit_pos >= bit_len_ ? 0 : bit_len_ - bit_pos;
        ones += span < usable ? span : usable;
      }
      bit_pos += span;
    } else {
      uint64_t left = bit_pos >= bit_len_ ? 0 : bit_len_ - bit_pos;
      uint32_t payload = w & kPayloadMask;
      if (left < kGroupBits) payload &= (1u << left) - 1u;
      ones += std::popcount(payload);
      bit_pos += kGroupBits;
    }
  }
  return ones;
}

inline std::vector<uint8_t> WahBitvector::serialize() const {
  std::vector<uint8_t> out(8 + 4 * words_.size());
  for (int i = 0; i < 8; ++i) out[i] = static_cast<uint8_t>(bit_len_ >> (8 * i));
  for (size_t k = 0; k < words_.size(); ++k) {
    for (int i = 0; i < 4; ++i) out[8 + 4 * k + i] = static_cast<uint8_t>(words_[k] >> (8 * i));
  }
  return out;
}

inline WahBitvector WahBitvector::deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 8 || (bytes.size() - 8) % 4 != 0) {
    throw CodecError("serialized WAH bitvector has malformed size");
  }
  uint64_t bit_len = 0;
  for (int i = 0; i < 8; ++i) bit_len |= static_cast<uint64_t>(bytes[i]) << (8 * i);
  std::vector<uint32_t> words((bytes.size() - 8) / 4);
  for (size_t k = 0; k < words.size(); ++k) {
    uint32_t w = 0;
    for (int i = 0; i < 4; ++i) w |= static_cast<uint32_t>(bytes[8 + 4 * k + i]) << (8 * i);
    words[k] = w;
  }
  WahBitvector v(std::move(words), bit_len);
  detail::check_coverage(v);
  return v;
}

/// Encode a raw bit sequence (one byte per bit, 0/1).
inline WahBitvector encode(std::span<const uint8_t> bits) {
  WahBuilder b;
  uint64_t n = bits.size();
  uint64_t full_groups = n / kGroupBits;
  for (uint64_t g = 0; g < full_groups; ++g) {
    uint32_t payload = 0;
    const uint8_t* p = bits.data() + g * kGroupBits;
    for (uint32_t k = 0; k < kGroupBits; ++k) payload |= static_cast<uint32_t>(p[k] & 1u) << k;
    b.add_group(payload);
  }
  uint32_t used = detail::tail_used_bits(n);
  if (used != 0) {
    uint32_t payload = 0;
    const uint8_t* p = bits.data() + full_groups * kGroupBits;
    for (uint32_t k = 0; k < used; ++k) payload |= static_cast<uint32_t>(p[k] & 1u) << k;
    b.add_tail(payload, used);
  }
  return b.finish();
}

inline std::vector<uint8_t> decode(const WahBitvector& v) {
  detail::check_coverage(v);
  std::vector<uint8_t> out(v.bit_len());
  uint64_t pos = 0;
  WahReader r(v);
  while (!r.done()) {
    if (r.at_fill()) {
      uint64_t span = r.run_left() * kGroupBits;
      uint64_t take = span < v.bit_len() - pos ? span : v.bit_len() - pos;
      if (r.value()) std::memset(out.data() + pos, 1, take);
      pos += take;
      r.advance(r.run_left());
    } else {
      uint32_t payload = r.payload();
      uint64_t take = kGroupBits < v.bit_len() - pos ? kGroupBits : v.bit_len() - pos;
      for (uint64_t k = 0; k < take; ++k) out[pos + k] = (payload >> k) & 1u;
      pos += take;
      r.advance(1);
    }
  }
  return out;
}

/// Flip the listed bit positions; positions must be strictly ascending and
/// below bit_len. Single pass, output canonical.
inline WahBitvector flip_bits_sorted(const WahBitvector& v, std::span<const uint64_t> positions) {
  for (size_t i = 0; i < positions.size(); ++i) {
    if (positions[i] >= v.bit_len()) throw RangeError("flip: position past bit_len");
    if (i > 0 && positions[i] <= positions[i - 1]) {
      throw RangeError("flip: positions not strictly ascending");
    }
  }
  if (positions.empty()) return v;

  WahBuilder b;
  WahReader r(v);
  size_t pi = 0;
  uint64_t total_groups = r.total_groups();
  uint32_t tail_used = detail::tail_used_bits(v.bit_len());
  while (!r.done()) {
    uint64_t g = r.group_pos();
    bool last_partial = tail_used != 0 && g == total_groups - 1;
    if (r.at_fill()) {
      // Emit the untouched prefix of the run in one piece.
      uint64_t run = r.run_left();
      uint64_t next_flip_group = pi < positions.size() ? positions[pi] / kGroupBits : UINT64_MAX;
      if (next_flip_group >= g + run) {
        // No flips inside this run; careful with a 1-fill covering the tail.
        bool covers_tail = tail_used != 0 && g + run == total_groups;
        b.add_fill(r.value(), covers_tail ? run - 1 : run);
        if (covers_tail) b.add_tail(r.value() ? (1u << tail_used) - 1u : 0u, tail_used);
        r.advance(run);
        continue;
      }
      uint64_t skip = next_flip_group - g;
      if (skip > 0) {
        b.add_fill(r.value(), skip);
        r.advance(skip);
        continue;
      }
      // Flip bits inside the first group of the fill.
      uint32_t payload = r.payload();
      uint64_t base = r.group_pos() * kGroupBits;
      while (pi < positions.size() && positions[pi] < base + kGroupBits) {
        payload ^= 1u << (positions[pi] - base);
        ++pi;
      }
      if (last_partial || (tail_used != 0 && r.group_pos() == total_groups - 1)) {
        b.add_tail(payload, tail_used);
      } else {
        b.add_group(payload);
      }
      r.advance(1);
    } else {
      uint32_t payload = r.payload();
      uint64_t base = g * kGroupBits;
      while (pi < positions.size() && positions[pi] < base + kGroupBits) {
        payload ^= 1u << (positions[pi] - base);
        ++pi;
      }
      if (last_partial) {
        b.add_tail(payload, tail_used);
      } else {
        b.add_group(payload);
      }
      r.advance(1);
    }
  }
  return b.finish();
}

inline WahBitvector flip_bit(const WahBitvector& v, uint64_t i) {
  uint64_t pos[1] = {i};
  return flip_bits_sorted(v, pos);
}

inline WahBitvector append_bit(const WahBitvector& v, bool bit) {
  WahBuilder b;
  WahReader r(v);
  uint32_t tail_used = detail::tail_used_bits(v.bit_len());
  uint64_t total_groups = r.total_groups();
  while (!r.done()) {
    bool covers_tail = tail_used != 0 && r.group_pos() + r.run_left() == total_groups;
    if (r.at_fill() && !covers_tail) {
      b.add_fill(r.value(), r.run_left());
      r.advance(r.run_left());
    } else if (r.at_fill()) {
      uint64_t run = r.run_left();
      if (run > 1) b.add_fill(r.value(), run - 1);
      uint32_t payload = r.value() ? (1u << tail_used) - 1u : 0u;
      payload |= static_cast<uint32_t>(bit) << tail_used;
      if (tail_used + 1 == kGroupBits) {
        b.add_group(payload);
      } else {
        b.add_tail(payload, tail_used + 1);
      }
      r.advance(run);
    } else {
      bool is_tail = tail_used != 0 && r.group_pos() == total_groups - 1;
      if (!is_tail) {
        b.add_group(r.payload());
      } else {
        uint32_t payload = r.payload() | (static_cast<uint32_t>(bit) << tail_used);
        if (tail_used + 1 == kGroupBits) {
          b.add_group(payload);
        } else {
          b.add_tail(payload, tail_used + 1);
        }
      }
      r.advance(1);
    }
  }
  if (tail_used == 0) {
    // Previous length was a multiple of 31: the new bit opens a fresh group.
    b.add_tail(bit ? 1u : 0u, 1);
  }
  return b.finish();
}

/// Append `count` zero bits (plumbing for row growth).
inline WahBitvector extend_with_zeros(const WahBitvector& v, uint64_t count) {
  if (count == 0) return v;
  WahBuilder b;
  WahReader r(v);
  uint32_t tail_used = detail::tail_used_bits(v.bit_len());
  uint64_t total_groups = r.total_groups();
  while (!r.done()) {
    bool covers_tail = tail_used != 0 && r.group_pos() + r.run_left() == total_groups;
    if (!covers_tail) {
      if (r.at_fill()) {
        b.add_fill(r.value(), r.run_left());
        r.advance(r.run_left());
      } else {
        b.add_group(r.payload());
        r.advance(1);
      }
      continue;
    }
    // The run/literal owning the partial tail group: re-emit the tail group
    // widened with zeros.
    uint64_t run = r.run_left();
    if (r.at_fill() && run > 1) b.add_fill(r.value(), run - 1);
    uint32_t payload = r.at_fill() ? (r.value() ? (1u << tail_used) - 1u : 0u) : r.payload();
    uint64_t grown = tail_used + count;
    if (grown >= kGroupBits) {
      b.add_group(payload);
      count = grown - kGroupBits;
    } else {
      b.add_tail(payload, static_cast<uint32_t>(grown));
      count = 0;
    }
    r.advance(run);
  }
  if (count > 0) {
    uint64_t full = count / kGroupBits;
    b.add_fill(false, full);
    uint32_t rest = static_cast<uint32_t>(count % kGroupBits);
    if (rest != 0) b.add_tail(0, rest);
  }
  return b.finish();
}

enum class BitOp : uint8_t { And, Or, Xor };

inline uint32_t apply_op(BitOp op, uint32_t a, uint32_t b) {
  switch (op) {
    case BitOp::And: return a & b;
    case BitOp::Or: return a | b;
    case BitOp::Xor: return a ^ b;
  }
  return 0;
}

/// Word-at-a-time logical op on compressed inputs; fills are skipped through
/// without expansion.
inline WahBitvector bitwise(BitOp op, const WahBitvector& a, const WahBitvector& b) {
  if (a.bit_len() != b.bit_len()) throw ShapeError("bitwise: bit_len mismatch");
  WahBuilder out;
  WahReader ra(a), rb(b);
  uint32_t tail_used = detail::tail_used_bits(a.bit_len());
  uint64_t total_groups = ra.total_groups();
  while (!ra.done()) {
    if (ra.at_fill() && rb.at_fill()) {
      uint64_t k = ra.run_left() < rb.run_left() ? ra.run_left() : rb.run_left();
      bool v = apply_op(op, ra.value() ? 1u : 0u, rb.value() ? 1u : 0u) != 0;
      bool covers_tail = tail_used != 0 && ra.group_pos() + k == total_groups;
      if (covers_tail) {
        if (k > 1) out.add_fill(v, k - 1);
        out.add_tail(v ? (1u << tail_used) - 1u : 0u, tail_used);
      } else {
        out.add_fill(v, k);
      }
      ra.advance(k);
      rb.advance(k);
    } else {
      uint32_t payload = apply_op(op, ra.payload(), rb.payload());
      bool is_tail = tail_used != 0 && ra.group_pos() == total_groups - 1;
      if (is_tail) {
        out.add_tail(payload, tail_used);
      } else {
        out.add_group(payload);
      }
      ra.advance(1);
      rb.advance(1);
    }
  }
  return out.finish();
}

/// Expand to machine words, logical bit i at word i/64 bit i%64. Padding zero.
inline std::vector<uint64_t> decode_words(const WahBitvector& v) {
  std::vector<uint64_t> out((v.bit_len() + 63) / 64, 0);
  WahReader r(v);
  uint64_t pos = 0;
  while (!r.done()) {
    if (r.at_fill()) {
      uint64_t span = r.run_left() * kGroupBits;
      uint64_t end = pos + span;
      if (end > v.bit_len()) end = v.bit_len();
      if (r.value()) {
        for (uint64_t i = pos; i < end; ++i) out[i >> 6] |= 1ull << (i & 63);
      }
      pos += span;
      r.advance(r.run_left());
    } else {
      uint32_t payload = r.payload();
      while (payload != 0) {
        uint32_t k = std::countr_zero(payload);
        uint64_t i = pos + k;
        if (i < v.bit_len()) out[i >> 6] |= 1ull << (i & 63);
        payload &= payload - 1;
      }
      pos += kGroupBits;
      r.advance(1);
    }
  }
  return out;
}

/// Compress machine words back into canonical WAH form.
inline WahBitvector encode_words(std::span<const uint64_t> words, uint64_t bit_len) {
  WahBuilder b;
  uint64_t full_groups = bit_len / kGroupBits;
  auto group_payload = [&](uint64_t g) -> uint32_t {
    uint64_t base = g * kGroupBits;
    uint64_t wi = base >> 6;
    uint32_t off = static_cast<uint32_t>(base & 63);
    uint64_t chunk = words[wi] >> off;
    if (off + kGroupBits > 64 && wi + 1 < words.size()) chunk |= words[wi + 1] << (64 - off);
    return static_cast<uint32_t>(chunk) & kPayloadMask;
  };
  for (uint64_t g = 0; g < full_groups; ++g) b.add_group(group_payload(g));
  uint32_t used = detail::tail_used_bits(bit_len);
  if (used != 0) b.add_tail(group_payload(full_groups) & ((1u << used) - 1u), used);
  return b.finish();
}

}  // namespace cubit
