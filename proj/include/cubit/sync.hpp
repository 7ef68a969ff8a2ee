#pragma once

// UDI commit protocols.
//
// Latch-based (lk): a per-index latch serializes conflict check, log append,
// and shared-variable effects. Contended committers can park their HUDs in a
// consolidation array; whoever holds the latch next commits the whole batch
// as one ULE.
//
// Latch-free (lf): the linearization point is a CAS on the tail node's next
// link. Shared-variable effects (version-chain head, N_ROWS, TIMESTAMP, in
// that order) are published in the ULE's redo descriptor beforehand, so any
// thread can finish them; a loser helps the winner before retrying.
//
// Both variants order effects so that a reader observing TIMESTAMP >= t also
// observes every effect of the ULE committed at t.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <optional>
#include <thread>
#include <vector>

#include "cubit/state.hpp"

namespace cubit {

struct CommitArgs {
  Ule* ule = nullptr;
  /// Last log node with commit_ts <= start_ts at snapshot time; the conflict
  /// window (start_ts, TAIL] is everything linked after it.
  Ule* from_pos = nullptr;
  Timestamp start_ts = 0;
  /// Rows this commit writes; empty for inserts (their row cannot collide by
  /// construction and is re-derived from the tail at the commit point).
  std::vector<RowId> conflict_rows;
  bool is_insert = false;
  /// Merge effects: version to publish at the chain head.
  VersionChain* install_chain = nullptr;
  std::unique_ptr<VersionedVB>* install_version = nullptr;
  /// Entries folded by a merge, stamped with the commit timestamp.
  const std::vector<HudEntry*>* invalidate = nullptr;
  bool allow_consolidation = true;
  RowId assigned_row = 0;  // inserts: row chosen at the commit point
};

namespace detail {

inline bool hud_rows_collide(const Ule* u, const std::vector<RowId>& sorted_rows) {
  for (const auto& e : u->huds) {
    if (std::binary_search(sorted_rows.begin(), sorted_rows.end(), e.hud.row)) return true;
  }
  for (RowId r : u->conflict_only_rows) {
    if (std::binary_search(sorted_rows.begin(), sorted_rows.end(), r)) return true;
  }
  return false;
}

/// Finish the shared-variable updates recorded in a linked ULE. Idempotent:
/// every entry is a one-shot CAS from the recorded old value. Returns true
/// when this call did the work.
inline bool apply_descriptor(Ule* u) {
  RedoDescriptor& d = u->descriptor;
  if (d.applied.load(std::memory_order_acquire)) return false;
  if (d.chain_head.target != nullptr) {
    VersionedVB* expect = d.chain_head.old_value;
    d.chain_head.target->compare_exchange_strong(expect, d.chain_head.new_value);
  }
  if (d.n_rows.target != nullptr) {
    uint64_t expect = d.n_rows.old_value;
    d.n_rows.target->compare_exchange_strong(expect, d.n_rows.new_value);
  }
  if (d.timestamp.target != nullptr) {
    uint64_t expect = d.timestamp.old_value;
    d.timestamp.target->compare_exchange_strong(expect, d.timestamp.new_value);
  }
  bool expect_flag = false;
  return d.applied.compare_exchange_strong(expect_flag, true, std::memory_order_acq_rel);
}

}  // namespace detail

/// True iff any ULE with commit_ts in (start_ts, TAIL.commit_ts] carries a
/// HUD for one of `rows` (sorted). `from_pos` is the last node at or before
/// start_ts; everything linked after it is in the window.
inline bool conflict_check(Ule* from_pos, const std::vector<RowId>& rows) {
  if (rows.empty()) return false;
  for (Ule* u = from_pos->next.load(std::memory_order_acquire); u != nullptr;
       u = u->next.load(std::memory_order_acquire)) {
    if (detail::hud_rows_collide(u, rows)) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Latch-based commit
// ---------------------------------------------------------------------------

namespace detail {

/// Core commit step under the held latch. Returns nullopt on conflict.
inline std::optional<Timestamp> lk_commit_under_latch(SharedState& s, CommitArgs& a) {
  if (conflict_check(a.from_pos, a.conflict_rows)) {
    s.stats.restarts.fetch_add(1, std::memory_order_relaxed);
    return std::nullopt;
  }
  Ule* tail = s.log.tail();
  Timestamp ts = tail->commit_ts + 1;
  if (a.is_insert) {
    a.assigned_row = tail->n_rows_after;
    a.ule->huds[0].hud.row = a.assigned_row;
  }
  a.ule->commit_ts = ts;
  a.ule->n_rows_after = tail->n_rows_after + (a.is_insert ? 1 : 0);

  CUBIT_PAUSE_POINT(s, PauseController::LkInCriticalSection);

  s.log.append_unsynchronized(a.ule);
  s.stats.committed_ules.fetch_add(1, std::memory_order_relaxed);
  if (a.invalidate != nullptr) DeltaLog::invalidate_merged(*a.invalidate, ts);
  if (a.install_chain != nullptr) {
    (*a.install_version)->commit_ts = ts;
    VersionedVB* v = a.install_version->release();
    bool ok = a.install_chain->install(v);
    (void)ok;  // per-slot merges are serialized, so the head cannot have moved
  }
  if (a.is_insert) {
    s.n_rows.store(a.ule->n_rows_after, std::memory_order_release);
  }
  s.timestamp.store(ts);  // visibility point; seq_cst pairs with snapshot reads
  return ts;
}

/// Commit every parked request as a single consolidated ULE. Runs with the
/// latch held. Requests whose snapshot conflicts with the window (or with an
/// earlier batch member) are rejected and restart alone.
inline void drain_consolidation(SharedState& s) {
  std::vector<ConsolidationRequest*> reqs;
  for (auto& slot : s.consolidation.slots) {
    ConsolidationRequest* r = slot.exchange(nullptr, std::memory_order_acq_rel);
    if (r != nullptr) reqs.push_back(r);
  }
  if (reqs.empty()) return;

  std::vector<ConsolidationRequest*> accepted;
  std::vector<RowId> batch_rows;
  for (ConsolidationRequest* r : reqs) {
    bool clash = conflict_check(r->from_pos, *r->conflict_rows);
    if (!clash) {
      for (RowId row : *r->conflict_rows) {
        if (std::binary_search(batch_rows.begin(), batch_rows.end(), row)) {
          clash = true;
          break;
        }
      }
    }
    if (clash) {
      s.stats.restarts.fetch_add(1, std::memory_order_relaxed);
      r->state.store(ConsolidationRequest::Rejected, std::memory_order_release);
      continue;
    }
    accepted.push_back(r);
    for (RowId row : *r->conflict_rows) {
      batch_rows.insert(std::upper_bound(batch_rows.begin(), batch_rows.end(), row), row);
    }
  }
  if (accepted.empty()) return;

  Ule* tail = s.log.tail();
  Timestamp ts = tail->commit_ts + 1;
  Ule* batch = s.log.pool().acquire(UleKind::Udi);
  batch->commit_ts = ts;
  uint64_t rows_after = tail->n_rows_after;
  for (ConsolidationRequest* r : accepted) {
    for (auto& e : r->ule->huds) {
      Hud h = e.hud;
      if (r->is_insert) {
        h.row = rows_after;
        r->result_row = rows_after;
        ++rows_after;
      }
      batch->huds.emplace_back(std::move(h));
    }
  }
  batch->n_rows_after = rows_after;
  s.log.append_unsynchronized(batch);
  s.stats.committed_ules.fetch_add(1, std::memory_order_relaxed);
  s.stats.consolidated_batches.fetch_add(1, std::memory_order_relaxed);
  s.stats.consolidated_ops.fetch_add(accepted.size(), std::memory_order_relaxed);
  if (rows_after != tail->n_rows_after) {
    s.n_rows.store(rows_after, std::memory_order_release);
  }
  s.timestamp.store(ts);
  for (ConsolidationRequest* r : accepted) {
    r->result_ts = ts;
    r->state.store(ConsolidationRequest::Committed, std::memory_order_release);
  }
}

/// Remove our still-pending request from the array. False means a
/// consolidator claimed it and has resolved (or is resolving) it.
inline bool unpublish(SharedState& s, ConsolidationRequest* r) {
  for (auto& slot : s.consolidation.slots) {
    ConsolidationRequest* expect = r;
    if (slot.compare_exchange_strong(expect, nullptr, std::memory_order_acq_rel)) return true;
  }
  return false;
}

}  // namespace detail

inline std::optional<Timestamp> commit_lk(SharedState& s, CommitArgs& a) {
  const uint32_t park_after = s.config.consolidation_spins;
  uint32_t tries = 0;
  for (;;) {
    if (s.commit_latch.try_lock()) {
      s.count_latch_acquisition();
      auto r = detail::lk_commit_under_latch(s, a);
      detail::drain_consolidation(s);
      s.commit_latch.unlock();
      return r;
    }
    ++tries;
    bool can_park = a.allow_consolidation && park_after > 0 && a.install_chain == nullptr;
    if (can_park && tries >= park_after) {
      ConsolidationRequest req;
      req.ule = a.ule;
      req.from_pos = a.from_pos;
      req.start_ts = a.start_ts;
      req.conflict_rows = &a.conflict_rows;
      req.is_insert = a.is_insert;
      if (s.consolidation.publish(&req)) {
        for (;;) {
          int st = req.state.load(std::memory_order_acquire);
          if (st == ConsolidationRequest::Committed) {
            a.assigned_row = req.result_row;
            return req.result_ts;
          }
          if (st == ConsolidationRequest::Rejected) return std::nullopt;
          if (s.commit_latch.try_lock()) {
            s.count_latch_acquisition();
            bool mine = detail::unpublish(s, &req);
            std::optional<Timestamp> r;
            if (mine) r = detail::lk_commit_under_latch(s, a);
            detail::drain_consolidation(s);
            s.commit_latch.unlock();
            if (mine) return r;
            continue;  // a consolidator resolved it; read the state
          }
          std::this_thread::yield();
        }
      }
      // Array full: fall back to blocking acquisition.
    }
    if (tries >= park_after + 64 || (!can_park && tries >= 64)) {
      s.commit_latch.lock();
      s.count_latch_acquisition();
      auto r = detail::lk_commit_under_latch(s, a);
      detail::drain_consolidation(s);
      s.commit_latch.unlock();
      return r;
    }
    std::this_thread::yield();
  }
}

// ---------------------------------------------------------------------------
// Latch-free commit
// ---------------------------------------------------------------------------

inline std::optional<Timestamp> commit_lf(SharedState& s, CommitArgs& a) {
  for (;;) {
    // Walk to the true tail, checking the conflict window on the way.
    Ule* hint = s.log.tail_link().load(std::memory_order_acquire);
    Ule* last = a.from_pos;
    bool conflict = false;
    for (Ule* u = last->next.load(std::memory_order_acquire); u != nullptr;
         u = u->next.load(std::memory_order_acquire)) {
      last = u;
      if (!conflict && detail::hud_rows_collide(u, a.conflict_rows)) conflict = true;
    }
    if (conflict) {
      s.stats.restarts.fetch_add(1, std::memory_order_relaxed);
      return std::nullopt;
    }
    // The last node's effects must be finished before anything commits after
    // it; losers help the winner here.
    if (detail::apply_descriptor(last)) s.stats.helps.fetch_add(1, std::memory_order_relaxed);
    if (hint != last) s.log.tail_link().compare_exchange_strong(hint, last);

    Timestamp ts = last->commit_ts + 1;
    if (a.is_insert) {
      a.assigned_row = last->n_rows_after;
      a.ule->huds[0].hud.row = a.assigned_row;
      a.ule->descriptor.n_rows = {&s.n_rows, a.assigned_row, a.assigned_row + 1};
    }
    a.ule->commit_ts = ts;
    a.ule->n_rows_after = last->n_rows_after + (a.is_insert ? 1 : 0);
    if (a.install_chain != nullptr) {
      VersionedVB* v = a.install_version->get();
      v->commit_ts = ts;
      a.ule->descriptor.chain_head = {&a.install_chain->head_link(),
                                      v->prev.load(std::memory_order_relaxed), v};
    }
    a.ule->descriptor.timestamp = {&s.timestamp, ts - 1, ts};
    a.ule->descriptor.applied.store(false, std::memory_order_relaxed);

    Ule* expect = nullptr;
    if (last->next.compare_exchange_strong(expect, a.ule, std::memory_order_acq_rel,
                                           std::memory_order_acquire)) {
      // Linearized. From here any thread can finish the shared variables.
      CUBIT_PAUSE_POINT(s, PauseController::LfAfterLink);
      if (a.install_chain != nullptr) a.install_version->release();
      detail::apply_descriptor(a.ule);
      Ule* t = last;
      s.log.tail_link().compare_exchange_strong(t, a.ule);
      s.stats.committed_ules.fetch_add(1, std::memory_order_relaxed);
      if (a.install_chain != nullptr) a.install_chain->note_version_installed();
      if (a.invalidate != nullptr) DeltaLog::invalidate_merged(*a.invalidate, ts);
      return ts;
    }
    // Lost the race; next iteration helps the winner and retries.
  }
}

inline std::optional<Timestamp> commit(SharedState& s, CommitArgs& a) {
  return s.config.sync == SyncVariant::Lk ? commit_lk(s, a) : commit_lf(s, a);
}

}  // namespace cubit
