#pragma once

// Per-value version chains of bitvector instances, plus construction of
// merge results (new version + synthetic ULE).
//
// A version carries two timestamps: commit_ts orders it in the chain and is
// what lookup compares against, floor_ts is the snapshot the merge ran at.
// Deltas committed between floor_ts and commit_ts by other rows are not in
// the merged bits, so readers of this version collect the window
// (floor_ts, start_ts] beginning at start_delta, the last log node the merge
// consumed.

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "cubit/delta.hpp"
#include "cubit/segmented.hpp"

namespace cubit {

struct VersionedVB {
  SegmentedBitvector bits;
  Timestamp commit_ts = 0;
  Timestamp floor_ts = 0;
  uint64_t rows_at_floor = 0;
  std::atomic<VersionedVB*> prev{nullptr};
  std::atomic<Ule*> start_delta{nullptr};
};

class VersionChain {
 public:
  VersionChain() = default;
  VersionChain(VersionChain&& o) noexcept {
    head_.store(o.head_.load(std::memory_order_relaxed), std::memory_order_relaxed);
    o.head_.store(nullptr, std::memory_order_relaxed);
    live_versions_.store(o.live_versions_.load(std::memory_order_relaxed),
                         std::memory_order_relaxed);
  }

  ~VersionChain() {
    VersionedVB* v = head_.load(std::memory_order_relaxed);
    while (v != nullptr) {
      VersionedVB* p = v->prev.load(std::memory_order_relaxed);
      delete v;
      v = p;
    }
  }

  VersionedVB* head() const { return head_.load(std::memory_order_acquire); }

  /// Newest version with commit_ts <= start_ts. The base version at ts 0
  /// always matches.
  VersionedVB* lookup(Timestamp start_ts) const {
    for (VersionedVB* v = head(); v != nullptr; v = v->prev.load(std::memory_order_acquire)) {
      if (v->commit_ts <= start_ts) return v;
    }
    return nullptr;
  }

  /// Atomically publish a newer version. Fails when a version with an equal
  /// or newer commit_ts already won; the caller discards its copy.
  bool install(VersionedVB* v) {
    VersionedVB* h = head_.load(std::memory_order_acquire);
    for (;;) {
      if (h != nullptr && h->commit_ts >= v->commit_ts) return false;
      v->prev.store(h, std::memory_order_relaxed);
      if (head_.compare_exchange_weak(h, v, std::memory_order_acq_rel,
                                      std::memory_order_acquire)) {
        live_versions_.fetch_add(1, std::memory_order_relaxed);
        return true;
      }
    }
  }

  uint32_t live_versions() const { return live_versions_.load(std::memory_order_relaxed); }
  void note_version_freed() { live_versions_.fetch_sub(1, std::memory_order_relaxed); }

  /// At most one merge per chain is in flight; extra requests are dropped.
  bool try_begin_merge() { return !merge_inflight_.exchange(true, std::memory_order_acq_rel); }
  void end_merge() { merge_inflight_.store(false, std::memory_order_release); }

  /// Raw head link for the latch-free redo descriptor.
  std::atomic<VersionedVB*>& head_link() { return head_; }
  void note_version_installed() { live_versions_.fetch_add(1, std::memory_order_relaxed); }

 private:
  std::atomic<VersionedVB*> head_{nullptr};
  std::atomic<bool> merge_inflight_{false};
  std::atomic<uint32_t> live_versions_{0};
};

struct MergePlan {
  VersionedVB* base = nullptr;
  std::unique_ptr<VersionedVB> version;   // commit_ts assigned at commit
  Ule* synthetic = nullptr;               // pool-owned, uncommitted
  std::vector<HudEntry*> to_invalidate;   // stamped after a successful commit
  std::vector<RowId> merged_rows;         // conflict set: every folded row
};

struct MergeOptions {
  bool emit_empty_residuals = false;
  Executor* executor = nullptr;
  /// Bits donated by an oversized query: used when they were computed from
  /// the same base version at the same snapshot.
  const SegmentedBitvector* donated = nullptr;
  Timestamp donated_base_ts = 0;
};

/// Assemble everything a merge commit needs. Returns nullopt when the window
/// holds nothing for the slot. The synthetic ULE carries each folded row's
/// residual mask (the merged slot removed). `base` is the chain head, pinned
/// by the caller's merge-in-flight flag; start_ts >= base->commit_ts.
inline std::optional<MergePlan> build_merge_plan(DeltaLog& log, VersionedVB* base, SlotId slot,
                                                 Timestamp start_ts, const MergeOptions& opt) {
  if (base == nullptr || start_ts < base->commit_ts) return std::nullopt;
  uint64_t rows_at = base->rows_at_floor;
  Ule* end_pos = nullptr;
  auto set = log.collect_with_end(base->start_delta.load(std::memory_order_acquire),
                                  base->floor_ts, start_ts, slot, &rows_at, &end_pos);
  if (set.empty()) return std::nullopt;

  MergePlan plan;
  plan.base = base;
  std::vector<uint64_t> rows;
  rows.reserve(set.size());
  for (auto& c : set) rows.push_back(c.row);

  plan.version = std::make_unique<VersionedVB>();
  if (opt.donated != nullptr && opt.donated_base_ts == base->commit_ts &&
      opt.donated->n_rows() == rows_at) {
    plan.version->bits = *opt.donated;
  } else {
    SegmentedBitvector bits = base->bits;
    if (rows_at > bits.n_rows()) bits = bits.extend_to(rows_at);
    plan.version->bits = bits.flip_rows(rows, opt.executor);
  }
  plan.version->floor_ts = start_ts;
  plan.version->rows_at_floor = rows_at;
  plan.version->start_delta.store(end_pos, std::memory_order_relaxed);
  // prev seeds the latch-free descriptor's expected chain head; the lk
  // install path rewrites it inside its CAS loop.
  plan.version->prev.store(base, std::memory_order_relaxed);

  plan.synthetic = log.pool().acquire(UleKind::Synthetic);
  for (auto& c : set) {
    PositionList residual = c.positions->without(slot);
    if (!residual.empty() || opt.emit_empty_residuals) {
      Hud h;
      h.row = c.row;
      h.positions = std::move(residual);
      plan.synthetic->huds.emplace_back(std::move(h));
    } else {
      // Omitted from collection, but the row was still written by this merge
      // and must stay visible to conflict checks.
      plan.synthetic->conflict_only_rows.push_back(c.row);
    }
    plan.to_invalidate.push_back(c.entry);
    plan.merged_rows.push_back(c.row);
  }
  return plan;
}

}  // namespace cubit
