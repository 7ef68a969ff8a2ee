#pragma once

// Bitvectors split into fixed-raw-size, independently compressed segments.
// Values are immutable once published; "mutators" return new values that
// share untouched segments with the input.

#include <algorithm>
#include <atomic>
#include <bit>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "cubit/errors.hpp"
#include "cubit/executor.hpp"
#include "cubit/wah.hpp"

namespace cubit {

/// Density above which an intermediate combine result is kept decompressed.
inline constexpr double kIntermediateDensityMax = 0.002;
/// Density above which an operand segment is decompressed before merging.
inline constexpr double kOperandDensityMax = 0.02;

struct CombineStats {
  std::atomic<uint64_t> compressed_steps{0};
  std::atomic<uint64_t> decompressed_steps{0};
  std::atomic<uint64_t> operands_decompressed{0};
};

class SegmentedBitvector {
 public:
  SegmentedBitvector() = default;

  SegmentedBitvector(uint64_t n_rows, uint64_t rows_per_segment, bool initial)
      : n_rows_(n_rows), rows_per_segment_(rows_per_segment) {
    if (rows_per_segment == 0) throw ConfigError("rows_per_segment must be positive");
    uint64_t full = n_rows / rows_per_segment;
    uint64_t rest = n_rows % rows_per_segment;
    if (full > 0) {
      // Full segments of equal content share one compressed payload.
      WahBuilder b;
      uint64_t groups = rows_per_segment / kGroupBits;
      uint32_t tail = static_cast<uint32_t>(rows_per_segment % kGroupBits);
      b.add_fill(initial, groups);
      if (tail != 0) b.add_tail(initial ? (1u << tail) - 1u : 0u, tail);
      auto shared = std::make_shared<const WahBitvector>(b.finish());
      segments_.assign(full, shared);
    }
    if (rest != 0) {
      WahBuilder b;
      uint64_t groups = rest / kGroupBits;
      uint32_t tail = static_cast<uint32_t>(rest % kGroupBits);
      b.add_fill(initial, groups);
      if (tail != 0) b.add_tail(initial ? (1u << tail) - 1u : 0u, tail);
      segments_.push_back(std::make_shared<const WahBitvector>(b.finish()));
    }
  }

  uint64_t n_rows() const { return n_rows_; }
  uint64_t rows_per_segment() const { return rows_per_segment_; }
  size_t segment_count() const { return segments_.size(); }
  const WahBitvector& segment(size_t k) const { return *segments_[k]; }
  std::shared_ptr<const WahBitvector> segment_ptr(size_t k) const { return segments_[k]; }

  bool get_bit(uint64_t row) const {
    if (row >= n_rows_) throw RangeError("get_bit: row past n_rows");
    return segments_[row / rows_per_segment_]->get_bit(row % rows_per_segment_);
  }

  uint64_t count_ones() const {
    uint64_t total = 0;
    for (auto& s : segments_) total += s->count_ones();
    return total;
  }

  double density() const {
    return n_rows_ == 0 ? 0.0 : static_cast<double>(count_ones()) / static_cast<double>(n_rows_);
  }

  /// Flip the listed rows (strictly ascending, all < n_rows). Only segments
  /// containing listed rows are rewritten; disjoint segments may be handled
  /// by different lanes.
  SegmentedBitvector flip_rows(std::span<const uint64_t> rows, Executor* ex = nullptr) const {
    for (size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] >= n_rows_) throw RangeError("flip_rows: row past n_rows");
      if (i > 0 && rows[i] <= rows[i - 1]) throw RangeError("flip_rows: rows not ascending");
    }
    if (rows.empty()) return *this;
    SegmentedBitvector out = *this;
    // Group rows by segment: [seg_begin, seg_end) index ranges into `rows`.
    struct Touch {
      size_t seg;
      size_t begin, end;
    };
    std::vector<Touch> touched;
    size_t i = 0;
    while (i < rows.size()) {
      size_t seg = static_cast<size_t>(rows[i] / rows_per_segment_);
      size_t j = i + 1;
      while (j < rows.size() && rows[j] / rows_per_segment_ == seg) ++j;
      touched.push_back({seg, i, j});
      i = j;
    }
    auto work = [&](size_t t) {
      const Touch& tc = touched[t];
      uint64_t base = static_cast<uint64_t>(tc.seg) * rows_per_segment_;
      std::vector<uint64_t> local(rows.begin() + tc.begin, rows.begin() + tc.end);
      for (auto& r : local) r -= base;
      out.segments_[tc.seg] =
          std::make_shared<const WahBitvector>(flip_bits_sorted(*segments_[tc.seg], local));
    };
    if (ex == nullptr) {
      for (size_t t = 0; t < touched.size(); ++t) work(t);
    } else {
      ex->parallel_for(touched.size(), work);
    }
    return out;
  }

  SegmentedBitvector append_row(bool bit) const {
    SegmentedBitvector out = *this;
    if (n_rows_ % rows_per_segment_ == 0 || segments_.empty()) {
      WahBuilder b;
      b.add_tail(bit ? 1u : 0u, 1);
      out.segments_.push_back(std::make_shared<const WahBitvector>(b.finish()));
    } else {
      out.segments_.back() =
          std::make_shared<const WahBitvector>(append_bit(*segments_.back(), bit));
    }
    out.n_rows_ = n_rows_ + 1;
    return out;
  }

  /// Grow to new_n_rows by appending zero rows.
  SegmentedBitvector extend_to(uint64_t new_n_rows) const {
    if (new_n_rows < n_rows_) throw RangeError("extend_to: shrinking not supported");
    if (new_n_rows == n_rows_) return *this;
    SegmentedBitvector out = *this;
    uint64_t need = new_n_rows - n_rows_;
    if (n_rows_ % rows_per_segment_ != 0 && !out.segments_.empty()) {
      uint64_t room = rows_per_segment_ - n_rows_ % rows_per_segment_;
      uint64_t take = room < need ? room : need;
      out.segments_.back() =
          std::make_shared<const WahBitvector>(extend_with_zeros(*segments_.back(), take));
      need -= take;
    }
    while (need > 0) {
      uint64_t take = need < rows_per_segment_ ? need : rows_per_segment_;
      WahBuilder b;
      b.add_fill(false, take / kGroupBits);
      if (take % kGroupBits != 0) b.add_tail(0, static_cast<uint32_t>(take % kGroupBits));
      out.segments_.push_back(std::make_shared<const WahBitvector>(b.finish()));
      need -= take;
    }
    out.n_rows_ = new_n_rows;
    return out;
  }

  /// Ascending positions of set bits, built block-by-block over machine words.
  std::vector<uint64_t> to_row_ids(Executor* ex = nullptr) const {
    std::vector<std::vector<uint64_t>> per_seg(segments_.size());
    auto work = [&](size_t k) {
      uint64_t base = static_cast<uint64_t>(k) * rows_per_segment_;
      auto words = decode_words(*segments_[k]);
      auto& out = per_seg[k];
      for (size_t wi = 0; wi < words.size(); ++wi) {
        uint64_t w = words[wi];
        while (w != 0) {
          out.push_back(base + (static_cast<uint64_t>(wi) << 6) + std::countr_zero(w));
          w &= w - 1;
        }
      }
    };
    if (ex == nullptr) {
      for (size_t k = 0; k < segments_.size(); ++k) work(k);
    } else {
      ex->parallel_for(segments_.size(), work);
    }
    std::vector<uint64_t> all;
    size_t total = 0;
    for (auto& v : per_seg) total += v.size();
    all.reserve(total);
    for (auto& v : per_seg) all.insert(all.end(), v.begin(), v.end());
    return all;
  }

  std::vector<uint8_t> to_bits() const {
    std::vector<uint8_t> out;
    out.reserve(n_rows_);
    for (auto& s : segments_) {
      auto part = decode(*s);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }

  friend bool operator==(const SegmentedBitvector& a, const SegmentedBitvector& b) {
    if (a.n_rows_ != b.n_rows_ || a.rows_per_segment_ != b.rows_per_segment_) return false;
    for (size_t k = 0; k < a.segments_.size(); ++k) {
      if (a.segments_[k] != b.segments_[k] && !(*a.segments_[k] == *b.segments_[k])) return false;
    }
    return true;
  }

  /// True when segment k is the same shared payload object in both values.
  bool shares_segment_with(const SegmentedBitvector& other, size_t k) const {
    return segments_[k] == other.segments_[k];
  }

  friend SegmentedBitvector combine(BitOp op, std::span<const SegmentedBitvector> inputs,
                                    Executor* ex, CombineStats* stats);

 private:
  std::vector<std::shared_ptr<const WahBitvector>> segments_;
  uint64_t n_rows_ = 0;
  uint64_t rows_per_segment_ = 1;
};

namespace detail {

inline void apply_wah_into_words(BitOp op, std::vector<uint64_t>& acc, const WahBitvector& v) {
  // OR: set runs of ones; AND: clear runs of zeros and mask literals.
  uint64_t pos = 0;
  WahReader r(v);
  auto for_range = [&](uint64_t begin, uint64_t end, auto&& word_fn) {
    // word_fn(word_index, mask) over the bit range [begin, end)
    if (begin >= end) return;
    uint64_t wb = begin >> 6, we = (end - 1) >> 6;
    for (uint64_t wi = wb; wi <= we; ++wi) {
      uint64_t lo = wi == wb ? (begin & 63) : 0;
      uint64_t hi = wi == we ? ((end - 1) & 63) : 63;
      uint64_t mask = (hi == 63 ? ~0ull : ((1ull << (hi + 1)) - 1)) & ~((1ull << lo) - 1);
      word_fn(wi, mask);
    }
  };
  while (!r.done()) {
    uint64_t span = r.at_fill() ? r.run_left() * kGroupBits : kGroupBits;
    uint64_t end = pos + span;
    if (end > v.bit_len()) end = v.bit_len();
    if (r.at_fill()) {
      if (op == BitOp::Or && r.value()) {
        for_range(pos, end, [&](uint64_t wi, uint64_t m) { acc[wi] |= m; });
      } else if (op == BitOp::And && !r.value()) {
        for_range(pos, end, [&](uint64_t wi, uint64_t m) { acc[wi] &= ~m; });
      }
      r.advance(r.run_left());
    } else {
      uint64_t payload = r.payload();
      uint64_t wi = pos >> 6;
      uint32_t off = static_cast<uint32_t>(pos & 63);
      uint64_t lo = payload << off;
      uint64_t hi_bits = off + kGroupBits > 64 ? payload >> (64 - off) : 0;
      uint64_t mask_lo = (kPayloadMask + 0ull) << off;
      uint64_t mask_hi = off + kGroupBits > 64 ? (kPayloadMask + 0ull) >> (64 - off) : 0;
      if (op == BitOp::Or) {
        acc[wi] |= lo;
        if (mask_hi && wi + 1 < acc.size()) acc[wi + 1] |= hi_bits;
      } else {
        acc[wi] &= lo | ~mask_lo;
        if (mask_hi && wi + 1 < acc.size()) acc[wi + 1] &= hi_bits | ~mask_hi;
      }
      r.advance(1);
    }
    pos += span;
  }
}

}  // namespace detail

/// Multi-way AND/OR. The per-segment intermediate stays compressed while its
/// density is below 0.2% and is switched to a machine-word block form above
/// that; operand segments above 2% density are decompressed before merging.
/// The result is re-canonicalized compressed form.
inline SegmentedBitvector combine(BitOp op, std::span<const SegmentedBitvector> inputs,
                                  Executor* ex = nullptr, CombineStats* stats = nullptr) {
  if (op == BitOp::Xor) throw ConfigError("combine supports AND/OR");
  if (inputs.empty()) throw ShapeError("combine: no inputs");
  const SegmentedBitvector& first = inputs[0];
  for (auto& in : inputs) {
    if (in.n_rows_ != first.n_rows_ || in.rows_per_segment_ != first.rows_per_segment_) {
      throw ShapeError("combine: shape mismatch");
    }
  }
  if (inputs.size() == 1) return first;

  SegmentedBitvector out = first;
  auto work = [&](size_t k) {
    uint64_t seg_bits = first.segments_[k]->bit_len();
    bool acc_compressed = true;
    WahBitvector acc = *first.segments_[k];
    std::vector<uint64_t> acc_words;
    uint64_t acc_ones = acc.count_ones();
    auto maybe_decompress_acc = [&] {
      if (acc_compressed && seg_bits > 0 &&
          static_cast<double>(acc_ones) / static_cast<double>(seg_bits) >=
              kIntermediateDensityMax) {
        acc_words = decode_words(acc);
        acc_compressed = false;
      }
    };
    maybe_decompress_acc();
    for (size_t i = 1; i < inputs.size(); ++i) {
      const WahBitvector& operand = *inputs[i].segments_[k];
      bool operand_dense = operand.density() > kOperandDensityMax;
      if (operand_dense && acc_compressed) {
        acc_words = decode_words(acc);
        acc_compressed = false;
        if (stats) stats->operands_decompressed.fetch_add(1, std::memory_order_relaxed);
      } else if (operand_dense && stats) {
        stats->operands_decompressed.fetch_add(1, std::memory_order_relaxed);
      }
      if (acc_compressed) {
        acc = bitwise(op, acc, operand);
        acc_ones = acc.count_ones();
        if (stats) stats->compressed_steps.fetch_add(1, std::memory_order_relaxed);
        maybe_decompress_acc();
      } else {
        detail::apply_wah_into_words(op, acc_words, operand);
        if (stats) stats->decompressed_steps.fetch_add(1, std::memory_order_relaxed);
      }
    }
    if (!acc_compressed) acc = encode_words(acc_words, seg_bits);
    out.segments_[k] = std::make_shared<const WahBitvector>(std::move(acc));
  };
  if (ex == nullptr) {
    for (size_t k = 0; k < first.segments_.size(); ++k) work(k);
  } else {
    ex->parallel_for(first.segments_.size(), work);
  }
  return out;
}

}  // namespace cubit
