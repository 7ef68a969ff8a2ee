#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "cubit/delta.hpp"
#include "cubit/executor.hpp"
#include "cubit/reclaim.hpp"
#include "cubit/version.hpp"

namespace cubit {

enum class SyncVariant : uint8_t { Lk, Lf };
enum class MaintenanceMode : uint8_t { Background, Inline, Off };

struct IndexConfig {
  /// Upper bound on distinct attribute values; 0 = derive from the data.
  uint32_t cardinality = 0;
  uint32_t merge_threshold = 16;
  /// Target number of segments per bitvector; rows_per_segment is derived as
  /// ceil(n_rows / segment_count) unless rows_per_segment is set directly.
  uint32_t segment_count = 1000;
  uint64_t rows_per_segment = 0;  // 0 = derive from segment_count
  uint32_t query_fanout = 2;      // worker lanes per query (1 = no helpers)
  uint32_t maint_ratio = 4;       // worker threads per maintenance thread
  uint32_t maintenance_threads = 0;  // 0 = derive: ceil(workers / maint_ratio)
  uint32_t expected_workers = 1;
  SyncVariant sync = SyncVariant::Lk;
  bool debug_empty_huds = false;
  /// Failed latch tries before a committer parks in the consolidation array;
  /// 0 disables consolidation.
  uint32_t consolidation_spins = 4;
  size_t merge_queue_cap = 1024;
  size_t ule_pool_capacity = 1 << 16;
  MaintenanceMode maintenance = MaintenanceMode::Background;
  std::chrono::microseconds maintenance_interval{200};
};

struct StatsSnapshot {
  uint64_t commit_latch_acquisitions = 0;
  uint64_t query_path_latch_acquisitions = 0;
  uint64_t restarts = 0;
  uint64_t helps = 0;
  uint64_t consolidated_batches = 0;
  uint64_t consolidated_ops = 0;
  uint64_t merges_executed = 0;
  uint64_t merges_aborted = 0;
  uint64_t merge_requests = 0;
  uint64_t merge_requests_dropped = 0;
  uint64_t versions_reclaimed = 0;
  uint64_t ules_reclaimed = 0;
  uint64_t committed_ules = 0;
};

struct Stats {
  std::atomic<uint64_t> commit_latch_acquisitions{0};
  std::atomic<uint64_t> query_path_latch_acquisitions{0};
  std::atomic<uint64_t> restarts{0};
  std::atomic<uint64_t> helps{0};
  std::atomic<uint64_t> consolidated_batches{0};
  std::atomic<uint64_t> consolidated_ops{0};
  std::atomic<uint64_t> merges_executed{0};
  std::atomic<uint64_t> merges_aborted{0};
  std::atomic<uint64_t> merge_requests{0};
  std::atomic<uint64_t> merge_requests_dropped{0};
  std::atomic<uint64_t> versions_reclaimed{0};
  std::atomic<uint64_t> ules_reclaimed{0};
  std::atomic<uint64_t> committed_ules{0};

  StatsSnapshot snapshot() const {
    StatsSnapshot s;
    s.commit_latch_acquisitions = commit_latch_acquisitions.load();
    s.query_path_latch_acquisitions = query_path_latch_acquisitions.load();
    s.restarts = restarts.load();
    s.helps = helps.load();
    s.consolidated_batches = consolidated_batches.load();
    s.consolidated_ops = consolidated_ops.load();
    s.merges_executed = merges_executed.load();
    s.merges_aborted = merges_aborted.load();
    s.merge_requests = merge_requests.load();
    s.merge_requests_dropped = merge_requests_dropped.load();
    s.versions_reclaimed = versions_reclaimed.load();
    s.ules_reclaimed = ules_reclaimed.load();
    s.committed_ules = committed_ules.load();
    return s;
  }
};

/// Set while the current thread executes a public query operation; used to
/// prove that query paths never touch the commit latch.
inline thread_local bool tls_in_query = false;

struct QueryPathGuard {
  bool prev;
  QueryPathGuard() : prev(tls_in_query) { tls_in_query = true; }
  ~QueryPathGuard() { tls_in_query = prev; }
};

#ifdef CUBIT_TEST_PAUSE
/// Test-only pause injection. A committer that reaches the armed point (and
/// wins the one-shot claim) parks until resumed.
struct PauseController {
  enum Point : int { None = -1, LfAfterLink = 0, LkInCriticalSection = 1 };
  std::atomic<int> armed{None};
  std::atomic<bool> claimed{false};
  std::atomic<bool> paused{false};
  std::atomic<bool> release{false};

  void arm(Point p) {
    claimed.store(false);
    paused.store(false);
    release.store(false);
    armed.store(p, std::memory_order_release);
  }
  void resume() { release.store(true, std::memory_order_release); }
  void wait_until_paused() {
    while (!paused.load(std::memory_order_acquire)) std::this_thread::yield();
  }
  void maybe_pause(Point p) {
    if (armed.load(std::memory_order_acquire) != p) return;
    if (claimed.exchange(true, std::memory_order_acq_rel)) return;
    paused.store(true, std::memory_order_release);
    while (!release.load(std::memory_order_acquire)) std::this_thread::yield();
    armed.store(None, std::memory_order_release);
  }
};
#define CUBIT_PAUSE_POINT(state, point) \
  do {                                  \
    if ((state).pause != nullptr) (state).pause->maybe_pause(point); \
  } while (0)
#else
#define CUBIT_PAUSE_POINT(state, point) \
  do {                                  \
  } while (0)
#endif

/// A committer parked in the consolidation array. The request is stack-owned
/// by the blocked committer; a consolidator claims the slot and must resolve
/// the request exactly once.
struct ConsolidationRequest {
  enum State : int { Pending = 0, Committed = 1, Rejected = 2 };
  Ule* ule = nullptr;
  Ule* from_pos = nullptr;
  Timestamp start_ts = 0;
  const std::vector<RowId>* conflict_rows = nullptr;
  bool is_insert = false;
  std::atomic<int> state{Pending};
  Timestamp result_ts = 0;
  RowId result_row = 0;
};

struct ConsolidationArray {
  static constexpr size_t kSlots = 64;
  std::array<std::atomic<ConsolidationRequest*>, kSlots> slots{};

  bool publish(ConsolidationRequest* r) {
    for (auto& s : slots) {
      ConsolidationRequest* expect = nullptr;
      if (s.compare_exchange_strong(expect, r, std::memory_order_acq_rel)) return true;
    }
    return false;
  }
};

struct MergeRequest {
  SlotId slot = 0;
  Timestamp start_ts = 0;
  Timestamp base_version_ts = 0;
  std::shared_ptr<const SegmentedBitvector> donated;
};

class MergeQueue {
 public:
  explicit MergeQueue(size_t cap) : cap_(cap) {}

  bool push(MergeRequest r) {
    std::lock_guard<std::mutex> g(mu_);
    if (q_.size() >= cap_) return false;
    q_.push_back(std::move(r));
    return true;
  }

  std::optional<MergeRequest> pop() {
    std::lock_guard<std::mutex> g(mu_);
    if (q_.empty()) return std::nullopt;
    MergeRequest r = std::move(q_.front());
    q_.pop_front();
    return r;
  }

  size_t depth() const {
    std::lock_guard<std::mutex> g(mu_);
    return q_.size();
  }

 private:
  mutable std::mutex mu_;
  size_t cap_;
  std::deque<MergeRequest> q_;
};

/// Deferred frees, released once their grace period has elapsed and (for
/// versions) the extra visibility conditions hold.
class RetireList {
 public:
  struct RetiredVersion {
    VersionedVB* version;
    VersionChain* chain;
    Timestamp newer_commit_ts;
    ReclamationDomain::Phase phase;
  };
  struct RetiredUle {
    Ule* ule;
    ReclamationDomain::Phase phase;
  };

  void retire_version(RetiredVersion v) {
    std::lock_guard<std::mutex> g(mu_);
    versions_.push_back(std::move(v));
  }
  void retire_ule(RetiredUle u) {
    std::lock_guard<std::mutex> g(mu_);
    ules_.push_back(std::move(u));
  }

  template <typename VersionFn>
  size_t drain_versions(const ReclamationDomain& domain, Timestamp now_ts,
                        VersionFn&& free_version, bool ignore_guards = false) {
    std::vector<RetiredVersion> keep, free;
    {
      std::lock_guard<std::mutex> g(mu_);
      for (auto& v : versions_) {
        bool ready = ignore_guards ||
                     (now_ts >= v.newer_commit_ts && domain.grace_period_elapsed(v.phase));
        (ready ? free : keep).push_back(std::move(v));
      }
      versions_.swap(keep);
    }
    for (auto& v : free) free_version(v);
    return free.size();
  }

  template <typename UleFn>
  size_t drain_ules(const ReclamationDomain& domain, UleFn&& free_ule,
                    bool ignore_guards = false) {
    std::vector<RetiredUle> keep, free;
    {
      std::lock_guard<std::mutex> g(mu_);
      for (auto& u : ules_) {
        bool ready = ignore_guards || domain.grace_period_elapsed(u.phase);
        (ready ? free : keep).push_back(std::move(u));
      }
      ules_.swap(keep);
    }
    for (auto& u : free) free_ule(u);
    return free.size();
  }

  size_t pending() const {
    std::lock_guard<std::mutex> g(mu_);
    return versions_.size() + ules_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<RetiredVersion> versions_;
  std::vector<RetiredUle> ules_;
};

/// Everything the commit protocols, queries, and maintenance share.
struct SharedState {
  SharedState(IndexConfig cfg, uint64_t initial_rows, size_t cardinality)
      : config(std::move(cfg)),
        log(config.ule_pool_capacity, initial_rows),
        chains(cardinality),
        merge_queue(config.merge_queue_cap) {
    timestamp.store(0, std::memory_order_relaxed);
    n_rows.store(initial_rows, std::memory_order_relaxed);
  }

  IndexConfig config;
  std::atomic<Timestamp> timestamp{0};
  std::atomic<uint64_t> n_rows{0};
  DeltaLog log;
  std::vector<VersionChain> chains;
  std::mutex commit_latch;
  ConsolidationArray consolidation;
  MergeQueue merge_queue;
  RetireList retire;
  ReclamationDomain domain;
  Stats stats;
#ifdef CUBIT_TEST_PAUSE
  PauseController* pause = nullptr;
#endif

  void count_latch_acquisition() {
    stats.commit_latch_acquisitions.fetch_add(1, std::memory_order_relaxed);
    if (tls_in_query) {
      stats.query_path_latch_acquisitions.fetch_add(1, std::memory_order_relaxed);
    }
  }
};

}  // namespace cubit
