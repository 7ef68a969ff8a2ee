#pragma once

// Parallelized baseline updatable bitmap indexes behind the same API:
//
//   In-place+ : per-slot bitvectors mutated by decode-flip-encode under one
//               global reader-writer latch.
//   UCB+      : append-only value bitvectors plus an existence bitvector and
//               a user->physical row indirection, global reader-writer latch.
//   UpBit+    : per-slot <VB, UB> pairs each under its own reader-writer
//               latch (queries evaluate VB xor UB), global latch for N_ROWS.
//
// They are comparison anchors: parallelized as described, not optimized.

#include <algorithm>
#include <atomic>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <vector>

#include "cubit/api.hpp"
#include "cubit/errors.hpp"
#include "cubit/index.hpp"
#include "cubit/wah.hpp"

namespace cubit {

struct BaselineStats {
  std::atomic<uint64_t> query_shared_acquisitions{0};
  std::atomic<uint64_t> udi_shared_acquisitions{0};
  std::atomic<uint64_t> udi_exclusive_acquisitions{0};
  std::atomic<uint64_t> retries{0};
  std::atomic<uint64_t> pair_merges{0};
};

namespace detail {

/// The full decode-flip-encode cycle on one bit.
inline WahBitvector dfe_flip(const WahBitvector& v, uint64_t i) {
  auto bits = decode(v);
  bits[i] ^= 1;
  return encode(bits);
}

inline WahBitvector padded_to(const WahBitvector& v, uint64_t len) {
  return v.bit_len() < len ? extend_with_zeros(v, len - v.bit_len()) : v;
}

inline std::vector<RowId> bv_row_ids(const WahBitvector& v) {
  std::vector<RowId> out;
  auto words = decode_words(v);
  for (size_t wi = 0; wi < words.size(); ++wi) {
    uint64_t w = words[wi];
    while (w != 0) {
      out.push_back((static_cast<uint64_t>(wi) << 6) + std::countr_zero(w));
      w &= w - 1;
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// In-place+
// ---------------------------------------------------------------------------

class InPlaceIndex final : public SecondaryIndex {
 public:
  InPlaceIndex(std::span<const Value> values, std::vector<Value> domain)
      : dict_(make_domain(values, std::move(domain))) {
    n_rows_.store(values.size(), std::memory_order_relaxed);
    std::vector<std::vector<uint8_t>> raw(dict_.cardinality(),
                                          std::vector<uint8_t>(values.size(), 0));
    for (uint64_t r = 0; r < values.size(); ++r) {
      auto slot = dict_.slot_of(values[r]);
      if (!slot) throw ConfigError("build value outside the explicit domain");
      raw[*slot - 1][r] = 1;
    }
    for (auto& bits : raw) slots_.push_back(encode(bits));
  }

  std::string_view name() const override { return "inplace"; }
  uint64_t row_count() const override { return n_rows_.load(std::memory_order_acquire); }

  std::vector<RowId> query_ids(Value lo, Value hi) override {
    auto [a, b] = slot_range(lo, hi);
    std::shared_lock g(latch_);
    stats_.query_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    return detail::bv_row_ids(evaluate(a, b));
  }

  QueryOutcome query(Value lo, Value hi, bool want_hash) override {
    auto [a, b] = slot_range(lo, hi);
    std::shared_lock g(latch_);
    stats_.query_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    QueryOutcome out;
    out.start_ts = counter_.load(std::memory_order_relaxed);
    WahBitvector bits = evaluate(a, b);
    if (want_hash) {
      for (RowId r : detail::bv_row_ids(bits)) out.digest.add(r);
    } else {
      out.digest.count = bits.count_ones();
    }
    return out;
  }

  std::optional<Value> value_of(RowId row) override {
    std::shared_lock g(latch_);
    stats_.udi_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (row >= n_rows_.load(std::memory_order_relaxed)) throw RangeError("row ordinal out of range");
    auto slot = slot_at(row);
    if (!slot) return std::nullopt;
    return dict_.value_of(*slot);
  }

  Timestamp update(RowId row, Value v) override {
    auto new_slot = dict_.slot_of(v);
    if (!new_slot) throw DomainError("update value not in domain");
    std::unique_lock g(latch_);
    stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (row >= n_rows_.load(std::memory_order_relaxed)) throw RangeError("row ordinal out of range");
    auto old_slot = slot_at(row);
    if (!old_slot) throw NotFoundError("row already deleted");
    if (*old_slot == *new_slot) throw NoopUpdateError("update to the current value");
    slots_[*old_slot - 1] = detail::dfe_flip(slots_[*old_slot - 1], row);
    slots_[*new_slot - 1] = detail::dfe_flip(slots_[*new_slot - 1], row);
    return counter_.fetch_add(1, std::memory_order_relaxed) + 1;
  }

  Timestamp remove(RowId row) override {
    std::unique_lock g(latch_);
    stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (row >= n_rows_.load(std::memory_order_relaxed)) throw RangeError("row ordinal out of range");
    auto old_slot = slot_at(row);
    if (!old_slot) throw NotFoundError("row already deleted");
    slots_[*old_slot - 1] = detail::dfe_flip(slots_[*old_slot - 1], row);
    return counter_.fetch_add(1, std::memory_order_relaxed) + 1;
  }

  InsertResult insert(Value v) override {
    auto slot = dict_.slot_of(v);
    if (!slot) throw DomainError("insert value not in domain");
    std::unique_lock g(latch_);
    stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
    RowId row = n_rows_.load(std::memory_order_relaxed);
    for (size_t k = 0; k < slots_.size(); ++k) {
      slots_[k] = append_bit(slots_[k], static_cast<SlotId>(k) + 1 == *slot);
    }
    n_rows_.store(row + 1, std::memory_order_release);
    return {row, counter_.fetch_add(1, std::memory_order_relaxed) + 1};
  }

  const BaselineStats& baseline_stats() const { return stats_; }
  const ValueDict& dict() const { return dict_; }

 private:
  static ValueDict make_domain(std::span<const Value> values, std::vector<Value> domain) {
    if (domain.empty()) domain.assign(values.begin(), values.end());
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    return ValueDict(std::move(domain));
  }

  std::pair<SlotId, SlotId> slot_range(Value lo, Value hi) const {
    auto a = dict_.slot_of(lo), b = dict_.slot_of(hi);
    if (!a || !b || *a > *b) throw DomainError("query predicate outside the value domain");
    return {*a, *b};
  }

  WahBitvector evaluate(SlotId a, SlotId b) const {
    WahBitvector acc = slots_[a - 1];
    for (SlotId s = a + 1; s <= b; ++s) acc = bitwise(BitOp::Or, acc, slots_[s - 1]);
    return acc;
  }

  std::optional<SlotId> slot_at(RowId row) const {
    for (size_t k = 0; k < slots_.size(); ++k) {
      if (slots_[k].get_bit(row)) return static_cast<SlotId>(k) + 1;
    }
    return std::nullopt;
  }

  ValueDict dict_;
  std::vector<WahBitvector> slots_;
  std::atomic<uint64_t> n_rows_{0};
  mutable std::shared_mutex latch_;
  std::atomic<Timestamp> counter_{0};
  BaselineStats stats_;
};

// ---------------------------------------------------------------------------
// UCB+
// ---------------------------------------------------------------------------

class UcbIndex final : public SecondaryIndex {
 public:
  UcbIndex(std::span<const Value> values, std::vector<Value> domain)
      : dict_(make_domain(values, std::move(domain))) {
    std::vector<std::vector<uint8_t>> raw(dict_.cardinality(),
                                          std::vector<uint8_t>(values.size(), 0));
    for (uint64_t r = 0; r < values.size(); ++r) {
      auto slot = dict_.slot_of(values[r]);
      if (!slot) throw ConfigError("build value outside the explicit domain");
      raw[*slot - 1][r] = 1;
      phys_of_user_.push_back(r);
      user_of_phys_.push_back(r);
    }
    for (auto& bits : raw) slots_.push_back(encode(bits));
    eb_ = encode(std::vector<uint8_t>(values.size(), 1));
    phys_rows_ = values.size();
    user_rows_.store(values.size(), std::memory_order_relaxed);
  }

  std::string_view name() const override { return "ucb"; }
  uint64_t row_count() const override { return user_rows_.load(std::memory_order_acquire); }

  std::vector<RowId> query_ids(Value lo, Value hi) override {
    auto [a, b] = slot_range(lo, hi);
    std::shared_lock g(latch_);
    stats_.query_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    std::vector<RowId> out = user_rows(a, b);
    return out;
  }

  QueryOutcome query(Value lo, Value hi, bool want_hash) override {
    auto [a, b] = slot_range(lo, hi);
    std::shared_lock g(latch_);
    stats_.query_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    QueryOutcome out;
    out.start_ts = counter_.load(std::memory_order_relaxed);
    if (want_hash) {
      for (RowId r : user_rows(a, b)) out.digest.add(r);
    } else {
      WahBitvector acc = evaluate_phys(a, b);
      out.digest.count = acc.count_ones();
    }
    return out;
  }

  std::optional<Value> value_of(RowId row) override {
    std::shared_lock g(latch_);
    stats_.udi_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (row >= phys_of_user_.size()) throw RangeError("row ordinal out of range");
    uint64_t p = phys_of_user_[row];
    if (!eb_.get_bit(p)) return std::nullopt;
    auto slot = slot_at_phys(p);
    return slot ? std::optional<Value>(dict_.value_of(*slot)) : std::nullopt;
  }

  Timestamp update(RowId row, Value v) override {
    auto new_slot = dict_.slot_of(v);
    if (!new_slot) throw DomainError("update value not in domain");
    std::unique_lock g(latch_);
    stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (row >= phys_of_user_.size()) throw RangeError("row ordinal out of range");
    uint64_t p = phys_of_user_[row];
    if (!eb_.get_bit(p)) throw NotFoundError("row already deleted");
    auto old_slot = slot_at_phys(p);
    if (old_slot && *old_slot == *new_slot) throw NoopUpdateError("update to the current value");
    // delete-then-append: invalidate the old physical row, append the value
    // at a fresh one, remap the user row.
    eb_ = detail::dfe_flip(eb_, p);
    uint64_t q = append_phys(*new_slot);
    phys_of_user_[row] = q;
    user_of_phys_.push_back(row);
    return counter_.fetch_add(1, std::memory_order_relaxed) + 1;
  }

  Timestamp remove(RowId row) override {
    std::unique_lock g(latch_);
    stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (row >= phys_of_user_.size()) throw RangeError("row ordinal out of range");
    uint64_t p = phys_of_user_[row];
    if (!eb_.get_bit(p)) throw NotFoundError("row already deleted");
    eb_ = detail::dfe_flip(eb_, p);
    return counter_.fetch_add(1, std::memory_order_relaxed) + 1;
  }

  InsertResult insert(Value v) override {
    auto slot = dict_.slot_of(v);
    if (!slot) throw DomainError("insert value not in domain");
    std::unique_lock g(latch_);
    stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
    RowId row = phys_of_user_.size();
    uint64_t q = append_phys(*slot);
    phys_of_user_.push_back(q);
    user_of_phys_.push_back(row);
    user_rows_.store(row + 1, std::memory_order_release);
    return {row, counter_.fetch_add(1, std::memory_order_relaxed) + 1};
  }

  const BaselineStats& baseline_stats() const { return stats_; }
  uint64_t physical_rows() const {
    std::shared_lock g(latch_);
    return phys_rows_;
  }

 private:
  static ValueDict make_domain(std::span<const Value> values, std::vector<Value> domain) {
    if (domain.empty()) domain.assign(values.begin(), values.end());
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    return ValueDict(std::move(domain));
  }

  std::pair<SlotId, SlotId> slot_range(Value lo, Value hi) const {
    auto a = dict_.slot_of(lo), b = dict_.slot_of(hi);
    if (!a || !b || *a > *b) throw DomainError("query predicate outside the value domain");
    return {*a, *b};
  }

  uint64_t append_phys(SlotId slot) {
    WahBitvector& bv = slots_[slot - 1];
    bv = append_bit(detail::padded_to(bv, phys_rows_), true);
    eb_ = append_bit(eb_, true);
    return phys_rows_++;
  }

  WahBitvector evaluate_phys(SlotId a, SlotId b) const {
    WahBitvector acc = detail::padded_to(slots_[a - 1], phys_rows_);
    for (SlotId s = a + 1; s <= b; ++s) {
      acc = bitwise(BitOp::Or, acc, detail::padded_to(slots_[s - 1], phys_rows_));
    }
    return bitwise(BitOp::And, acc, eb_);
  }

  std::vector<RowId> user_rows(SlotId a, SlotId b) const {
    std::vector<RowId> out;
    for (RowId p : detail::bv_row_ids(evaluate_phys(a, b))) out.push_back(user_of_phys_[p]);
    std::sort(out.begin(), out.end());
    return out;
  }

  std::optional<SlotId> slot_at_phys(uint64_t p) const {
    for (size_t k = 0; k < slots_.size(); ++k) {
      if (p < slots_[k].bit_len() && slots_[k].get_bit(p)) return static_cast<SlotId>(k) + 1;
    }
    return std::nullopt;
  }

  ValueDict dict_;
  std::vector<WahBitvector> slots_;
  WahBitvector eb_;
  std::vector<uint64_t> phys_of_user_;
  std::vector<RowId> user_of_phys_;
  uint64_t phys_rows_ = 0;
  std::atomic<uint64_t> user_rows_{0};
  mutable std::shared_mutex latch_;
  std::atomic<Timestamp> counter_{0};
  BaselineStats stats_;
};

// ---------------------------------------------------------------------------
// UpBit+
// ---------------------------------------------------------------------------

class UpBitIndex final : public SecondaryIndex {
 public:
  UpBitIndex(std::span<const Value> values, std::vector<Value> domain,
             uint32_t merge_threshold = 16)
      : dict_(make_domain(values, std::move(domain))), merge_threshold_(merge_threshold) {
    n_rows_.store(values.size(), std::memory_order_relaxed);
    std::vector<std::vector<uint8_t>> raw(dict_.cardinality(),
                                          std::vector<uint8_t>(values.size(), 0));
    for (uint64_t r = 0; r < values.size(); ++r) {
      auto slot = dict_.slot_of(values[r]);
      if (!slot) throw ConfigError("build value outside the explicit domain");
      raw[*slot - 1][r] = 1;
    }
    pairs_ = std::vector<Pair>(dict_.cardinality());
    for (size_t k = 0; k < pairs_.size(); ++k) {
      pairs_[k].vb = encode(raw[k]);
      pairs_[k].ub = encode(std::vector<uint8_t>(values.size(), 0));
    }
  }

  std::string_view name() const override { return "upbit"; }
  uint64_t row_count() const override { return n_rows_.load(std::memory_order_acquire); }

  std::vector<RowId> query_ids(Value lo, Value hi) override {
    auto [a, b] = slot_range(lo, hi);
    std::shared_lock g(global_latch_);
    stats_.query_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    uint64_t len = n_rows_.load(std::memory_order_relaxed);
    WahBitvector acc;
    {
      MultiSharedLock locks(pairs_, a, b);
      acc = evaluate_locked(a, b, len);
    }
    maybe_merge(a, b);
    return detail::bv_row_ids(acc);
  }

  QueryOutcome query(Value lo, Value hi, bool want_hash) override {
    auto [a, b] = slot_range(lo, hi);
    std::shared_lock g(global_latch_);
    stats_.query_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
    uint64_t len = n_rows_.load(std::memory_order_relaxed);
    QueryOutcome out;
    WahBitvector acc;
    {
      MultiSharedLock locks(pairs_, a, b);
      out.start_ts = counter_.load(std::memory_order_relaxed);
      acc = evaluate_locked(a, b, len);
    }
    maybe_merge(a, b);
    if (want_hash) {
      for (RowId r : detail::bv_row_ids(acc)) out.digest.add(r);
    } else {
      out.digest.count = acc.count_ones();
    }
    return out;
  }

  std::optional<Value> value_of(RowId row) override {
    std::shared_lock g(global_latch_);
    if (row >= n_rows_.load(std::memory_order_relaxed)) {
      throw RangeError("row ordinal out of range");
    }
    MultiSharedLock locks(pairs_, 1, static_cast<SlotId>(pairs_.size()));
    return slot_at_locked(row);
  }

  Timestamp update(RowId row, Value v) override {
    auto new_slot = dict_.slot_of(v);
    if (!new_slot) throw DomainError("update value not in domain");
    for (;;) {
      SlotId old_slot;
      {
        std::shared_lock g(global_latch_);
        if (row >= n_rows_.load(std::memory_order_relaxed)) {
          throw RangeError("row ordinal out of range");
        }
        MultiSharedLock locks(pairs_, 1, static_cast<SlotId>(pairs_.size()));
        stats_.udi_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
        auto cur = slot_at_locked(row);
        if (!cur) throw NotFoundError("row already deleted");
        if (dict_.value_of(*cur) == v) throw NoopUpdateError("update to the current value");
        old_slot = *cur;
      }
      // Upgrade by release-and-reacquire in ascending slot order, then
      // revalidate: the row may have changed in between.
      SlotId lo = std::min(old_slot, *new_slot), hi = std::max(old_slot, *new_slot);
      std::unique_lock la(pairs_[lo - 1].latch);
      std::unique_lock lb(pairs_[hi - 1].latch);
      stats_.udi_exclusive_acquisitions.fetch_add(2, std::memory_order_relaxed);
      uint64_t len = padded_len();
      if (!evaluated_bit_locked(old_slot, row, len)) {
        stats_.retries.fetch_add(1, std::memory_order_relaxed);
        continue;
      }
      flip_ub(pairs_[old_slot - 1], row, len);
      flip_ub(pairs_[*new_slot - 1], row, len);
      return counter_.fetch_add(1, std::memory_order_relaxed) + 1;
    }
  }

  Timestamp remove(RowId row) override {
    for (;;) {
      SlotId old_slot;
      {
        std::shared_lock g(global_latch_);
        if (row >= n_rows_.load(std::memory_order_relaxed)) {
          throw RangeError("row ordinal out of range");
        }
        MultiSharedLock locks(pairs_, 1, static_cast<SlotId>(pairs_.size()));
        stats_.udi_shared_acquisitions.fetch_add(1, std::memory_order_relaxed);
        auto cur = slot_at_locked(row);
        if (!cur) throw NotFoundError("row already deleted");
        old_slot = *cur;
      }
      std::unique_lock la(pairs_[old_slot - 1].latch);
      stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
      uint64_t len = padded_len();
      if (!evaluated_bit_locked(old_slot, row, len)) {
        stats_.retries.fetch_add(1, std::memory_order_relaxed);
        continue;
      }
      flip_ub(pairs_[old_slot - 1], row, len);
      return counter_.fetch_add(1, std::memory_order_relaxed) + 1;
    }
  }

  InsertResult insert(Value v) override {
    auto slot = dict_.slot_of(v);
    if (!slot) throw DomainError("insert value not in domain");
    std::unique_lock g(global_latch_);
    std::unique_lock lv(pairs_[*slot - 1].latch);
    stats_.udi_exclusive_acquisitions.fetch_add(2, std::memory_order_relaxed);
    RowId row = n_rows_.load(std::memory_order_relaxed);
    Pair& p = pairs_[*slot - 1];
    p.ub = append_bit(detail::padded_to(p.ub, row), true);
    p.ub_ones += 1;
    n_rows_.store(row + 1, std::memory_order_release);
    return {row, counter_.fetch_add(1, std::memory_order_relaxed) + 1};
  }

  const BaselineStats& baseline_stats() const { return stats_; }
  uint64_t pair_merges() const { return stats_.pair_merges.load(std::memory_order_relaxed); }

 private:
  struct Pair {
    WahBitvector vb, ub;
    uint64_t ub_ones = 0;
    mutable std::shared_mutex latch;
  };

  class MultiSharedLock {
   public:
    MultiSharedLock(std::vector<Pair>& pairs, SlotId a, SlotId b) : pairs_(pairs), a_(a), b_(b) {
      for (SlotId s = a_; s <= b_; ++s) pairs_[s - 1].latch.lock_shared();
    }
    ~MultiSharedLock() {
      for (SlotId s = b_ + 1; s-- > a_;) pairs_[s - 1].latch.unlock_shared();
    }

   private:
    std::vector<Pair>& pairs_;
    SlotId a_, b_;
  };

  static ValueDict make_domain(std::span<const Value> values, std::vector<Value> domain) {
    if (domain.empty()) domain.assign(values.begin(), values.end());
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    return ValueDict(std::move(domain));
  }

  std::pair<SlotId, SlotId> slot_range(Value lo, Value hi) const {
    auto a = dict_.slot_of(lo), b = dict_.slot_of(hi);
    if (!a || !b || *a > *b) throw DomainError("query predicate outside the value domain");
    return {*a, *b};
  }

  uint64_t padded_len() const { return n_rows_.load(std::memory_order_relaxed); }

  WahBitvector evaluated_locked(SlotId s, uint64_t len) const {
    const Pair& p = pairs_[s - 1];
    return bitwise(BitOp::Xor, detail::padded_to(p.vb, len), detail::padded_to(p.ub, len));
  }

  WahBitvector evaluate_locked(SlotId a, SlotId b, uint64_t len) const {
    WahBitvector acc = evaluated_locked(a, len);
    for (SlotId s = a + 1; s <= b; ++s) acc = bitwise(BitOp::Or, acc, evaluated_locked(s, len));
    return acc;
  }

  bool evaluated_bit_locked(SlotId s, RowId row, uint64_t len) const {
    const Pair& p = pairs_[s - 1];
    bool vb = row < p.vb.bit_len() ? p.vb.get_bit(row) : false;
    bool ub = row < p.ub.bit_len() ? p.ub.get_bit(row) : false;
    (void)len;
    return vb != ub;
  }

  std::optional<SlotId> slot_at_locked(RowId row) const {
    for (size_t k = 0; k < pairs_.size(); ++k) {
      if (evaluated_bit_locked(static_cast<SlotId>(k) + 1, row, 0)) {
        return static_cast<SlotId>(k) + 1;
      }
    }
    return std::nullopt;
  }

  void flip_ub(Pair& p, RowId row, uint64_t len) {
    p.ub = detail::dfe_flip(detail::padded_to(p.ub, len), row);
    p.ub_ones = p.ub.count_ones();
  }

  /// Merge <VB, UB> pairs opportunistically after a read once UB's ones
  /// exceed the threshold.
  void maybe_merge(SlotId a, SlotId b) {
    for (SlotId s = a; s <= b; ++s) {
      Pair& p = pairs_[s - 1];
      {
        std::shared_lock ls(p.latch);
        if (p.ub_ones <= merge_threshold_) continue;
      }
      std::unique_lock lx(p.latch);
      stats_.udi_exclusive_acquisitions.fetch_add(1, std::memory_order_relaxed);
      if (p.ub_ones <= merge_threshold_) continue;
      uint64_t len = std::max(p.vb.bit_len(), p.ub.bit_len());
      p.vb = bitwise(BitOp::Xor, detail::padded_to(p.vb, len), detail::padded_to(p.ub, len));
      p.ub = encode(std::vector<uint8_t>(len, 0));
      p.ub_ones = 0;
      stats_.pair_merges.fetch_add(1, std::memory_order_relaxed);
    }
  }

  ValueDict dict_;
  std::vector<Pair> pairs_;
  std::atomic<uint64_t> n_rows_{0};
  mutable std::shared_mutex global_latch_;
  uint32_t merge_threshold_;
  std::atomic<Timestamp> counter_{0};
  BaselineStats stats_;
};

}  // namespace cubit
