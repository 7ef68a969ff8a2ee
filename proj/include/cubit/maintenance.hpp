#pragma once

// Background maintenance: merge execution, epoch-based reclamation of retired
// bitvector versions and fully-covered log prefixes, and HEAD advancement.

#include <atomic>
#include <chrono>
#include <optional>
#include <thread>
#include <unordered_set>
#include <vector>

#include "cubit/state.hpp"
#include "cubit/sync.hpp"
#include "cubit/version.hpp"

namespace cubit {

/// Execute one merge request end to end: build the new version, commit the
/// synthetic ULE, publish the version, retire the base. Returns the commit
/// timestamp on success. A conflicting merge is discarded and re-enqueued
/// with a fresh snapshot (merges are advisory).
inline std::optional<Timestamp> run_merge(SharedState& s, const MergeRequest& req, Executor* ex) {
  VersionChain& chain = s.chains[req.slot - 1];
  if (!chain.try_begin_merge()) return std::nullopt;
  std::optional<Timestamp> result;
  bool conflicted = false;
  {
    OpGuard guard(s.domain);
    // The in-flight flag pins the chain head for the whole merge; fresh
    // snapshots resolve to it directly, so no deeper (reclaimable) version
    // is ever touched.
    VersionedVB* base = chain.head();
    Timestamp fresh = s.timestamp.load();
    MergeOptions opt;
    opt.emit_empty_residuals = s.config.debug_empty_huds || s.config.sync == SyncVariant::Lf;
    opt.executor = ex;
    Timestamp start_ts = fresh;
    if (req.donated != nullptr && req.base_version_ts == base->commit_ts &&
        req.start_ts >= base->commit_ts && req.start_ts <= fresh) {
      // The donating query ran against this same version at req.start_ts, so
      // its bits match the window exactly.
      start_ts = req.start_ts;
      opt.donated = req.donated.get();
      opt.donated_base_ts = req.base_version_ts;
    }
    auto plan = build_merge_plan(s.log, base, req.slot, start_ts, opt);
    if (plan) {
      CommitArgs args;
      args.ule = plan->synthetic;
      args.from_pos = plan->version->start_delta.load(std::memory_order_relaxed);
      args.start_ts = start_ts;
      args.conflict_rows = plan->merged_rows;
      args.install_chain = &chain;
      args.install_version = &plan->version;
      args.invalidate = &plan->to_invalidate;
      args.allow_consolidation = false;
      result = commit(s, args);
      if (result) {
        s.retire.retire_version({plan->base, &chain, *result, s.domain.snapshot()});
        s.stats.merges_executed.fetch_add(1, std::memory_order_relaxed);
      } else {
        s.log.pool().release(plan->synthetic);
        s.stats.merges_aborted.fetch_add(1, std::memory_order_relaxed);
        conflicted = true;
      }
    }
  }
  chain.end_merge();
  if (conflicted) {
    // Re-enqueue with a fresh snapshot and without the stale donation.
    MergeRequest retry{req.slot, s.timestamp.load(std::memory_order_acquire), 0, nullptr};
    if (s.merge_queue.push(std::move(retry))) {
      s.stats.merge_requests.fetch_add(1, std::memory_order_relaxed);
    } else {
      s.stats.merge_requests_dropped.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return result;
}

/// Free retired versions whose conditions hold: a newer version is installed,
/// TIMESTAMP has reached its commit_ts, and a grace period has elapsed.
inline size_t reclaim_versions(SharedState& s, bool ignore_guards = false) {
  Timestamp now = s.timestamp.load(std::memory_order_acquire);
  size_t n = s.retire.drain_versions(
      s.domain, now,
      [&](RetireList::RetiredVersion& rv) {
        VersionedVB* target = rv.version;
        VersionedVB* p = rv.chain->head();
        while (p != nullptr && p->prev.load(std::memory_order_acquire) != target) {
          p = p->prev.load(std::memory_order_acquire);
        }
        if (p != nullptr) {
          p->prev.store(target->prev.load(std::memory_order_relaxed),
                        std::memory_order_release);
        }
        delete target;
        rv.chain->note_version_freed();
      },
      ignore_guards);
  s.stats.versions_reclaimed.fetch_add(n, std::memory_order_relaxed);
  return n;
}

/// Advance HEAD past log nodes that sit before every live version's
/// start_delta, retiring them; then free the retired ones whose grace period
/// has elapsed.
inline size_t advance_head(SharedState& s) {
  std::unordered_set<Ule*> anchors;
  for (auto& chain : s.chains) {
    for (VersionedVB* v = chain.head(); v != nullptr;
         v = v->prev.load(std::memory_order_acquire)) {
      anchors.insert(v->start_delta.load(std::memory_order_acquire));
    }
  }
  size_t retired = 0;
  Ule* node = s.log.head();
  std::optional<ReclamationDomain::Phase> phase;
  while (node != nullptr && anchors.count(node) == 0) {
    Ule* next = node->next.load(std::memory_order_acquire);
    if (next == nullptr) break;  // never retire the tail node
    s.log.set_head(next);
    if (!phase) phase = s.domain.snapshot();
    s.retire.retire_ule({node, *phase});
    ++retired;
    node = next;
  }
  return retired;
}

inline size_t reclaim_ules(SharedState& s, bool ignore_guards = false) {
  advance_head(s);
  size_t n = s.retire.drain_ules(
      s.domain, [&](RetireList::RetiredUle& ru) { s.log.pool().release(ru.ule); }, ignore_guards);
  s.stats.ules_reclaimed.fetch_add(n, std::memory_order_relaxed);
  return n;
}

/// One maintenance iteration: drain the merge queue, then reclaim.
inline void maintenance_cycle(SharedState& s, Executor* ex, bool reclaim) {
  while (auto req = s.merge_queue.pop()) {
    run_merge(s, *req, ex);
  }
  if (reclaim) {
    reclaim_versions(s);
    reclaim_ules(s);
  }
}

/// Background loop; responds to the stop signal within one iteration.
inline void run_maintenance(SharedState& s, Executor* ex, bool reclaim, std::stop_token stop) {
  while (!stop.stop_requested()) {
    maintenance_cycle(s, ex, reclaim);
    std::this_thread::sleep_for(s.config.maintenance_interval);
  }
}

}  // namespace cubit
