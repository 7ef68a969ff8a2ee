#pragma once

// Row-wise update deltas (HUDs) and the append-only Delta Log of ULEs.
//
// A HUD is a row's accumulated flip mask over value slots: applying it to the
// value bitvectors of its era yields the row's current bits. Each UDI logs
// the row's full new mask, so a log walk needs only the latest entry per row
// (latest-wins). An entry invalidated by a merge still shadows older entries
// for windows that include the merge; it just contributes nothing itself.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "cubit/errors.hpp"

namespace cubit {

using RowId = uint64_t;
using SlotId = uint32_t;  // 1-based position in the ordered value domain
using Timestamp = uint64_t;

/// Strictly ascending slot positions; at most two live inline, larger lists
/// spill to the heap.
class PositionList {
 public:
  static constexpr uint32_t kInlineCapacity = 2;

  PositionList() = default;
  PositionList(std::initializer_list<SlotId> slots) {
    for (SlotId s : slots) push_back(s);
  }
  PositionList(const PositionList& o) { copy_from(o); }
  PositionList& operator=(const PositionList& o) {
    if (this != &o) {
      release();
      copy_from(o);
    }
    return *this;
  }
  PositionList(PositionList&& o) noexcept
      : size_(o.size_), spill_(o.spill_) {
    inline_[0] = o.inline_[0];
    inline_[1] = o.inline_[1];
    o.spill_ = nullptr;
    o.size_ = 0;
  }
  PositionList& operator=(PositionList&& o) noexcept {
    if (this != &o) {
      release();
      size_ = o.size_;
      spill_ = o.spill_;
      inline_[0] = o.inline_[0];
      inline_[1] = o.inline_[1];
      o.spill_ = nullptr;
      o.size_ = 0;
    }
    return *this;
  }
  ~PositionList() { release(); }

  uint32_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  bool spilled() const { return spill_ != nullptr; }

  const SlotId* begin() const { return spill_ ? spill_->data() : inline_; }
  const SlotId* end() const { return begin() + size_; }
  SlotId operator[](uint32_t i) const { return begin()[i]; }

  void push_back(SlotId s) {
    if (size_ > 0 && begin()[size_ - 1] >= s) {
      throw RangeError("PositionList: slots must be strictly ascending");
    }
    if (spill_ == nullptr && size_ < kInlineCapacity) {
      inline_[size_++] = s;
      return;
    }
    if (spill_ == nullptr) {
      spill_ = new std::vector<SlotId>(inline_, inline_ + size_);
    }
    spill_->push_back(s);
    ++size_;
  }

  bool contains(SlotId s) const {
    for (SlotId x : *this) {
      if (x == s) return true;
      if (x > s) return false;
    }
    return false;
  }

  /// Copy with one slot removed (no-op if absent).
  PositionList without(SlotId s) const {
    PositionList out;
    for (SlotId x : *this) {
      if (x != s) out.push_back(x);
    }
    return out;
  }

  /// Symmetric difference with a strictly ascending flip set.
  PositionList xor_with(const PositionList& flips) const {
    PositionList out;
    const SlotId *a = begin(), *ae = end(), *b = flips.begin(), *be = flips.end();
    while (a != ae || b != be) {
      if (b == be || (a != ae && *a < *b)) {
        out.push_back(*a++);
      } else if (a == ae || *b < *a) {
        out.push_back(*b++);
      } else {
        ++a;
        ++b;
      }
    }
    return out;
  }

  friend bool operator==(const PositionList& x, const PositionList& y) {
    if (x.size_ != y.size_) return false;
    return std::memcmp(x.begin(), y.begin(), x.size_ * sizeof(SlotId)) == 0;
  }

 private:
  void copy_from(const PositionList& o) {
    size_ = o.size_;
    if (o.spill_) {
      spill_ = new std::vector<SlotId>(*o.spill_);
    } else {
      spill_ = nullptr;
      inline_[0] = o.inline_[0];
      inline_[1] = o.inline_[1];
    }
  }
  void release() {
    delete spill_;
    spill_ = nullptr;
  }

  uint32_t size_ = 0;
  SlotId inline_[kInlineCapacity] = {0, 0};
  std::vector<SlotId>* spill_ = nullptr;
};

struct Hud {
  RowId row = 0;
  PositionList positions;

  friend bool operator==(const Hud& a, const Hud& b) {
    return a.row == b.row && a.positions == b.positions;
  }
};

/// HUD constructors for the three UDI kinds. These produce the *flip set* of
/// the operation; the caller composes it with the row's previous mask.
inline Hud hud_for_update(RowId row, SlotId old_slot, SlotId new_slot) {
  if (old_slot == new_slot) throw NoopUpdateError("update to the current value");
  Hud h;
  h.row = row;
  if (old_slot < new_slot) {
    h.positions.push_back(old_slot);
    h.positions.push_back(new_slot);
  } else {
    h.positions.push_back(new_slot);
    h.positions.push_back(old_slot);
  }
  return h;
}

inline Hud hud_for_delete(RowId row, SlotId cur_slot) {
  Hud h;
  h.row = row;
  h.positions.push_back(cur_slot);
  return h;
}

inline Hud hud_for_insert(RowId row, SlotId slot) {
  Hud h;
  h.row = row;
  h.positions.push_back(slot);
  return h;
}

enum class UleKind : uint8_t { Dummy, Udi, Synthetic };

struct VersionedVB;  // version chain node; see version.hpp

/// Shared-variable redo list for the latch-free commit path: each entry is a
/// compare-and-swap from the recorded old value to the new one, idempotent
/// under any number of helpers.
struct RedoDescriptor {
  struct NumEntry {
    std::atomic<uint64_t>* target = nullptr;
    uint64_t old_value = 0;
    uint64_t new_value = 0;
  };
  struct PtrEntry {
    std::atomic<VersionedVB*>* target = nullptr;
    VersionedVB* old_value = nullptr;
    VersionedVB* new_value = nullptr;
  };
  PtrEntry chain_head;          // applied first when present
  NumEntry n_rows;              // present for inserts
  NumEntry timestamp;           // always last
  std::atomic<bool> applied{false};

  void clear() {
    chain_head = {};
    n_rows = {};
    timestamp = {};
    applied.store(false, std::memory_order_relaxed);
  }
};

struct HudEntry {
  Hud hud;
  /// 0 while live; otherwise the commit timestamp of the merge that folded
  /// this row into a new bitvector version.
  std::atomic<Timestamp> invalidated_at{0};

  HudEntry() = default;
  explicit HudEntry(Hud h) : hud(std::move(h)) {}
  HudEntry(HudEntry&& o) noexcept : hud(std::move(o.hud)) {
    invalidated_at.store(o.invalidated_at.load(std::memory_order_relaxed),
                         std::memory_order_relaxed);
  }
};

struct Ule {
  UleKind kind = UleKind::Dummy;
  bool pooled = false;
  Timestamp commit_ts = 0;
  uint64_t n_rows_after = 0;  // global row count once this entry is visible
  std::vector<HudEntry> huds;
  /// Rows written by this entry that carry no collectible HUD (a synthetic
  /// entry whose residual came out empty). They still count as writes for
  /// conflict detection.
  std::vector<RowId> conflict_only_rows;
  RedoDescriptor descriptor;
  std::atomic<Ule*> next{nullptr};

  void reset(UleKind k) {
    kind = k;
    commit_ts = 0;
    n_rows_after = 0;
    huds.clear();
    conflict_only_rows.clear();
    descriptor.clear();
    next.store(nullptr, std::memory_order_relaxed);
  }
};

/// Slab-backed ULE allocator with a lock-free free list. Nodes re-enter the
/// free list only after a reclamation grace period, which is what makes the
/// unversioned CAS on free_head_ safe.
class UlePool {
 public:
  explicit UlePool(size_t capacity) {
    if (capacity > 0) {
      slabs_.emplace_back(std::make_unique<Ule[]>(capacity));
      Ule* slab = slabs_.back().get();
      for (size_t i = 0; i < capacity; ++i) {
        slab[i].pooled = true;
        slab[i].next.store(i + 1 < capacity ? &slab[i + 1] : nullptr, std::memory_order_relaxed);
      }
      free_head_.store(slab, std::memory_order_relaxed);
    }
  }

  Ule* acquire(UleKind kind) {
    Ule* head = free_head_.load(std::memory_order_acquire);
    while (head != nullptr) {
      Ule* next = head->next.load(std::memory_order_relaxed);
      if (free_head_.compare_exchange_weak(head, next, std::memory_order_acq_rel,
                                           std::memory_order_acquire)) {
        head->reset(kind);
        return head;
      }
    }
    Ule* u = new Ule();
    u->pooled = false;
    u->reset(kind);
    overflow_allocs_.fetch_add(1, std::memory_order_relaxed);
    return u;
  }

  void release(Ule* u) {
    if (!u->pooled) {
      delete u;
      return;
    }
    Ule* head = free_head_.load(std::memory_order_relaxed);
    do {
      u->next.store(head, std::memory_order_relaxed);
    } while (!free_head_.compare_exchange_weak(head, u, std::memory_order_acq_rel,
                                               std::memory_order_relaxed));
  }

  uint64_t overflow_allocs() const { return overflow_allocs_.load(std::memory_order_relaxed); }

 private:
  std::vector<std::unique_ptr<Ule[]>> slabs_;
  std::atomic<Ule*> free_head_{nullptr};
  std::atomic<uint64_t> overflow_allocs_{0};
};

/// One collected row in a HUD set.
struct CollectedHud {
  RowId row = 0;
  const PositionList* positions = nullptr;  // borrowed from the log entry
  Timestamp entry_ts = 0;
  HudEntry* entry = nullptr;
};

/// Latest committed HUD per row within a timestamp window.
class HudSet {
 public:
  void absorb(HudEntry* e, Timestamp ts) {
    auto& slot = rows_[e->hud.row];
    // Walks proceed in ascending timestamp order, so overwrite wins.
    slot.row = e->hud.row;
    slot.positions = &e->hud.positions;
    slot.entry_ts = ts;
    slot.entry = e;
  }

  /// Drop rows whose final entry was invalidated at or before `hi`, then
  /// rows not containing `filter_slot` (dedup happens before the filter).
  std::vector<CollectedHud> finish(Timestamp hi, std::optional<SlotId> filter_slot) const {
    std::vector<CollectedHud> out;
    out.reserve(rows_.size());
    for (auto& [row, c] : rows_) {
      Timestamp inv = c.entry->invalidated_at.load(std::memory_order_acquire);
      if (inv != 0 && inv <= hi) continue;
      if (filter_slot && !c.positions->contains(*filter_slot)) continue;
      out.push_back(c);
    }
    std::sort(out.begin(), out.end(),
              [](const CollectedHud& a, const CollectedHud& b) { return a.row < b.row; });
    return out;
  }

  size_t raw_size() const { return rows_.size(); }
  const std::unordered_map<RowId, CollectedHud>& rows() const { return rows_; }

 private:
  std::unordered_map<RowId, CollectedHud> rows_;
};

class DeltaLog {
 public:
  explicit DeltaLog(size_t pool_capacity, uint64_t initial_rows) : pool_(pool_capacity) {
    Ule* dummy = pool_.acquire(UleKind::Dummy);
    dummy->commit_ts = 0;
    dummy->n_rows_after = initial_rows;
    head_.store(dummy, std::memory_order_relaxed);
    tail_.store(dummy, std::memory_order_relaxed);
  }

  ~DeltaLog() {
    // Single-threaded at teardown; pooled nodes die with their slab.
    Ule* n = head_.load(std::memory_order_relaxed);
    while (n != nullptr) {
      Ule* next = n->next.load(std::memory_order_relaxed);
      if (!n->pooled) delete n;
      n = next;
    }
  }

  DeltaLog(const DeltaLog&) = delete;
  DeltaLog& operator=(const DeltaLog&) = delete;

  // head load/store are sequentially consistent: walkers must either appear
  // in the reclaimer's grace-period snapshot or observe the advanced head.
  Ule* head() const { return head_.load(); }
  Ule* tail() const { return tail_.load(std::memory_order_acquire); }
  UlePool& pool() { return pool_; }

  void set_head(Ule* h) { head_.store(h); }
  std::atomic<Ule*>& tail_link() { return tail_; }

  /// Link `u` after the current tail. Caller holds exclusive commit rights
  /// and has already assigned commit_ts (predecessor's + 1).
  void append_unsynchronized(Ule* u) {
    Ule* t = tail_.load(std::memory_order_relaxed);
    t->next.store(u, std::memory_order_release);
    tail_.store(u, std::memory_order_release);
  }

  /// Collect the latest HUD per row over commit_ts in (lo, hi], starting the
  /// walk at `from` (a node with commit_ts <= lo still linked in the chain).
  std::vector<CollectedHud> collect(Ule* from, Timestamp lo, Timestamp hi,
                                    std::optional<SlotId> filter_slot = std::nullopt,
                                    uint64_t* rows_at_hi = nullptr) const {
    HudSet set;
    walk(from, lo, hi, rows_at_hi, [&](Ule* u) {
      for (auto& e : u->huds) set.absorb(const_cast<HudEntry*>(&e), u->commit_ts);
    });
    return set.finish(hi, filter_slot);
  }

  /// collect() that also reports the last chain node with commit_ts <= hi —
  /// the position a version built over this window resumes scanning from.
  std::vector<CollectedHud> collect_with_end(Ule* from, Timestamp lo, Timestamp hi,
                                             std::optional<SlotId> filter_slot,
                                             uint64_t* rows_at_hi, Ule** end_pos) const {
    HudSet set;
    Ule* last = nullptr;
    walk(from, lo, hi, rows_at_hi, [&](Ule* u) {
      for (auto& e : u->huds) set.absorb(const_cast<HudEntry*>(&e), u->commit_ts);
    }, &last);
    if (end_pos) *end_pos = last != nullptr ? last : from;
    return set.finish(hi, filter_slot);
  }

  /// Latest mask entry for one row over (lo, hi]; nullopt when the row has no
  /// live entry in the window.
  std::optional<CollectedHud> collect_row(Ule* from, Timestamp lo, Timestamp hi, RowId row,
                                          uint64_t* rows_at_hi = nullptr,
                                          Ule** end_pos = nullptr) const {
    CollectedHud best{};
    bool found = false;
    Ule* last = nullptr;
    walk(from, lo, hi, rows_at_hi, [&](Ule* u) {
      for (auto& e : u->huds) {
        if (e.hud.row == row) {
          best = {row, &e.hud.positions, u->commit_ts, const_cast<HudEntry*>(&e)};
          found = true;
        }
      }
    }, &last);
    if (end_pos) *end_pos = last != nullptr ? last : from;
    if (!found) return std::nullopt;
    Timestamp inv = best.entry->invalidated_at.load(std::memory_order_acquire);
    if (inv != 0 && inv <= hi) return std::nullopt;
    return best;
  }

  /// Mark the given entries as folded into a version committed at `merge_ts`.
  static void invalidate_merged(std::span<HudEntry* const> entries, Timestamp merge_ts) {
    for (HudEntry* e : entries) e->invalidated_at.store(merge_ts, std::memory_order_release);
  }

  /// One line per ULE: ts=<t> kind=<k> huds=[<row>:<p1,p2,...> ...]
  void dump(std::ostream& os) const {
    for (Ule* u = head(); u != nullptr; u = u->next.load(std::memory_order_acquire)) {
      os << "ts=" << u->commit_ts << " kind=";
      switch (u->kind) {
        case UleKind::Dummy: os << "dummy"; break;
        case UleKind::Udi: os << "udi"; break;
        case UleKind::Synthetic: os << "synthetic"; break;
      }
      os << " huds=[";
      bool first_h = true;
      for (auto& e : u->huds) {
        if (!first_h) os << ' ';
        first_h = false;
        os << e.hud.row << ':';
        bool first_p = true;
        for (SlotId p : e.hud.positions) {
          if (!first_p) os << ',';
          first_p = false;
          os << p;
        }
      }
      os << "]\n";
    }
  }

 private:
  template <typename Fn>
  void walk(Ule* from, Timestamp lo, Timestamp hi, uint64_t* rows_at_hi, Fn&& fn,
            Ule** last_in_window = nullptr) const {
    for (Ule* u = from; u != nullptr; u = u->next.load(std::memory_order_acquire)) {
      if (u->commit_ts > hi) break;
      if (rows_at_hi) *rows_at_hi = u->n_rows_after;
      if (last_in_window) *last_in_window = u;
      if (u->commit_ts > lo) fn(u);
    }
  }

  std::atomic<Ule*> head_{nullptr};
  std::atomic<Ule*> tail_{nullptr};
  UlePool pool_;
};

}  // namespace cubit
