#pragma once

// Quiescent-state-based grace periods. Workers bracket each index operation
// with enter_op/exit_op; a retired object is freed once every operation that
// was in flight at retirement has finished. Threads that sit idle between
// operations never hold references and never delay a grace period.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <vector>

namespace cubit {

class ReclamationDomain {
 public:
  struct WorkerRec {
    /// Even = quiescent, odd = inside an operation. Bumped on enter and exit.
    std::atomic<uint64_t> state{0};
  };

  class Phase {
   public:
    Phase() = default;

   private:
    friend class ReclamationDomain;
    std::vector<std::pair<const WorkerRec*, uint64_t>> snap_;
  };

  WorkerRec* register_worker() {
    std::lock_guard<std::mutex> g(mu_);
    workers_.push_back(std::make_unique<WorkerRec>());
    return workers_.back().get();
  }

  /// Cached per-thread registration, keyed by a process-unique domain id so
  /// a recycled domain address never resolves to a stale record.
  WorkerRec* this_worker() {
    thread_local std::vector<std::pair<uint64_t, WorkerRec*>> cache;
    for (auto& [id, r] : cache) {
      if (id == id_) return r;
    }
    WorkerRec* r = register_worker();
    cache.emplace_back(id_, r);
    return r;
  }

  // Sequentially consistent on purpose: an operation's enter must order
  // against the reclaimer's unlink-then-snapshot sequence, or a late starter
  // could read a pre-unlink pointer while looking quiescent.
  void enter_op(WorkerRec* r) { r->state.fetch_add(1); }
  void exit_op(WorkerRec* r) { r->state.fetch_add(1); }

  /// Capture the set of in-flight operations.
  Phase snapshot() const {
    Phase p;
    std::lock_guard<std::mutex> g(mu_);
    p.snap_.reserve(workers_.size());
    for (auto& w : workers_) {
      p.snap_.emplace_back(w.get(), w->state.load());
    }
    return p;
  }

  /// True once every operation that was running when `p` was captured has
  /// completed. Trivially true with no registered workers.
  bool grace_period_elapsed(const Phase& p) const {
    for (auto& [rec, seen] : p.snap_) {
      if ((seen & 1) != 0 && rec->state.load() == seen) return false;
    }
    return true;
  }

  size_t worker_count() const {
    std::lock_guard<std::mutex> g(mu_);
    return workers_.size();
  }

 private:
  static uint64_t next_id() {
    static std::atomic<uint64_t> n{1};
    return n.fetch_add(1, std::memory_order_relaxed);
  }

  const uint64_t id_ = next_id();
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<WorkerRec>> workers_;
};

class OpGuard {
 public:
  explicit OpGuard(ReclamationDomain& d) : d_(d), rec_(d.this_worker()) { d_.enter_op(rec_); }
  ~OpGuard() { d_.exit_op(rec_); }
  OpGuard(const OpGuard&) = delete;
  OpGuard& operator=(const OpGuard&) = delete;

 private:
  ReclamationDomain& d_;
  ReclamationDomain::WorkerRec* rec_;
};

}  // namespace cubit
