#pragma once

// The CUBIT index: equality-encoded bitmap index with out-of-place row-wise
// deltas, multi-version snapshots, and the lk/lf commit protocols.

#include <algorithm>
#include <cassert>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cubit/api.hpp"
#include "cubit/maintenance.hpp"
#include "cubit/state.hpp"
#include "cubit/sync.hpp"
#include "cubit/version.hpp"

namespace cubit {

/// Closed attribute dictionary: value <-> 1-based slot over the sorted domain.
class ValueDict {
 public:
  ValueDict() = default;
  explicit ValueDict(std::vector<Value> sorted_domain) : values_(std::move(sorted_domain)) {}

  size_t cardinality() const { return values_.size(); }

  std::optional<SlotId> slot_of(Value v) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), v);
    if (it == values_.end() || *it != v) return std::nullopt;
    return static_cast<SlotId>(it - values_.begin()) + 1;
  }

  Value value_of(SlotId slot) const { return values_[slot - 1]; }

 private:
  std::vector<Value> values_;
};

struct Snapshot {
  Timestamp start_ts = 0;
};

class CubitIndex final : public SecondaryIndex {
 public:
  /// Equality-encode `values` (row ordinal = position). The domain is fixed
  /// at construction: the explicit list if given, otherwise the distinct
  /// values present. config.cardinality, when nonzero, caps the domain size.
  CubitIndex(std::span<const Value> values, IndexConfig config,
             std::vector<Value> explicit_domain = {})
      : dict_(make_dict(values, config, std::move(explicit_domain))),
        state_(config, values.size(), dict_.cardinality()) {
    if (state_.config.query_fanout > 1) {
      pool_ = std::make_unique<PoolExecutor>(state_.config.query_fanout - 1);
    }
    uint64_t n = values.size();
    uint64_t rps = state_.config.rows_per_segment;
    if (rps == 0) {
      rps = state_.config.segment_count == 0 ? 1 : (n + state_.config.segment_count - 1) /
                                                       state_.config.segment_count;
      if (rps == 0) rps = 1;
    }
    rows_per_segment_ = rps;

    std::vector<std::vector<uint64_t>> rows_per_slot(dict_.cardinality());
    for (uint64_t r = 0; r < n; ++r) {
      auto slot = dict_.slot_of(values[r]);
      if (!slot) throw ConfigError("build value outside the explicit domain");
      rows_per_slot[*slot - 1].push_back(r);
    }
    for (size_t k = 0; k < dict_.cardinality(); ++k) {
      auto base = std::make_unique<VersionedVB>();
      base->bits = SegmentedBitvector(n, rps, false).flip_rows(rows_per_slot[k]);
      base->commit_ts = 0;
      base->floor_ts = 0;
      base->rows_at_floor = n;
      base->start_delta.store(state_.log.head(), std::memory_order_relaxed);
      state_.chains[k].install(base.release());
    }
    start_maintenance();
  }

  ~CubitIndex() override {
    stop_maintenance();
    // Single-threaded teardown: free deferred objects unconditionally.
    state_.retire.drain_versions(
        state_.domain, 0,
        [&](RetireList::RetiredVersion& rv) {
          VersionedVB* p = rv.chain->head();
          while (p != nullptr && p->prev.load(std::memory_order_relaxed) != rv.version) {
            p = p->prev.load(std::memory_order_relaxed);
          }
          if (p != nullptr) {
            p->prev.store(rv.version->prev.load(std::memory_order_relaxed),
                          std::memory_order_relaxed);
          }
          delete rv.version;
        },
        /*ignore_guards=*/true);
    state_.retire.drain_ules(
        state_.domain, [&](RetireList::RetiredUle& ru) { state_.log.pool().release(ru.ule); },
        /*ignore_guards=*/true);
  }

  // --- SecondaryIndex surface ------------------------------------------

  std::string_view name() const override {
    return state_.config.sync == SyncVariant::Lk ? "cubit-lk" : "cubit-lf";
  }

  uint64_t row_count() const override { return state_.n_rows.load(std::memory_order_acquire); }

  std::vector<RowId> query_ids(Value lo, Value hi) override {
    return query_range(lo, hi).to_row_ids(executor());
  }

  QueryOutcome query(Value lo, Value hi, bool want_hash) override {
    QueryOutcome out;
    SegmentedBitvector bits;
    {
      OpGuard guard(state_.domain);
      QueryPathGuard qguard;
      out.start_ts = state_.timestamp.load();
      bits = evaluate_range(lo, hi, out.start_ts);
    }
    if (want_hash) {
      for (RowId r : bits.to_row_ids(executor())) out.digest.add(r);
    } else {
      out.digest.count = bits.count_ones();
    }
    after_op();
    return out;
  }

  std::optional<Value> value_of(RowId row) override {
    std::optional<SlotId> slot;
    {
      OpGuard guard(state_.domain);
      QueryPathGuard qguard;
      Ule* head = state_.log.head();  // read before the timestamp
      Timestamp start_ts = state_.timestamp.load();
      slot = lookup_value_inner(row, head, start_ts);
    }
    if (!slot) return std::nullopt;
    return dict_.value_of(*slot);
  }

  Timestamp update(RowId row, Value new_value) override {
    auto new_slot = dict_.slot_of(new_value);
    if (!new_slot) throw DomainError("update value not in domain");
    Timestamp ts = run_udi(row, *new_slot, /*is_delete=*/false);
    after_op();
    return ts;
  }

  Timestamp remove(RowId row) override {
    Timestamp ts = run_udi(row, 0, /*is_delete=*/true);
    after_op();
    return ts;
  }

  InsertResult insert(Value v) override {
    auto slot = dict_.slot_of(v);
    if (!slot) throw DomainError("insert value not in domain");
    InsertResult r = run_insert(*slot);
    after_op();
    return r;
  }

  // --- Snapshot-pinned operations ---------------------------------------

  Snapshot snapshot() const { return {state_.timestamp.load()}; }

  SegmentedBitvector query_value(Value v) { return query_range(v, v); }

  SegmentedBitvector query_range(Value lo, Value hi) {
    SegmentedBitvector out;
    {
      OpGuard guard(state_.domain);
      QueryPathGuard qguard;
      out = evaluate_range(lo, hi, state_.timestamp.load());
    }
    after_op();
    return out;
  }

  /// Evaluate a predicate at a pinned snapshot. The snapshot's versions and
  /// log window must still be retained (reclamation off, or a current ts).
  SegmentedBitvector query_range_at(Value lo, Value hi, Snapshot snap) {
    OpGuard guard(state_.domain);
    QueryPathGuard qguard;
    return evaluate_range(lo, hi, snap.start_ts);
  }

  /// The slot whose evaluated bit at `row` is set, or nullopt for a deleted
  /// row. Pinned-snapshot variant, same retention caveat as query_range_at.
  std::optional<SlotId> lookup_value(RowId row, Snapshot snap) {
    OpGuard guard(state_.domain);
    QueryPathGuard qguard;
    return lookup_value_inner(row, state_.log.head(), snap.start_ts);
  }

  // --- Maintenance hooks -------------------------------------------------

  /// Drain pending merges (and reclaim) on the calling thread.
  void run_maintenance_now() { maintenance_cycle(state_, executor(), true); }

  /// Force a merge of one slot at the current timestamp.
  bool force_merge(Value v) {
    auto slot = dict_.slot_of(v);
    if (!slot) throw DomainError("merge value not in domain");
    MergeRequest req{*slot, state_.timestamp.load(std::memory_order_acquire), 0, nullptr};
    return run_merge(state_, req, executor()).has_value();
  }

  void force_merge_all() {
    for (size_t k = 0; k < dict_.cardinality(); ++k) {
      MergeRequest req{static_cast<SlotId>(k) + 1,
                       state_.timestamp.load(std::memory_order_acquire), 0, nullptr};
      run_merge(state_, req, executor());
    }
  }

  // --- Introspection ------------------------------------------------------

  SharedState& shared() { return state_; }
  const ValueDict& dict() const { return dict_; }
  StatsSnapshot stats() const { return state_.stats.snapshot(); }
  Executor* executor() { return pool_ ? static_cast<Executor*>(pool_.get()) : nullptr; }
  uint64_t rows_per_segment() const { return rows_per_segment_; }

  /// Serialize every slot's evaluated bitvector at the current snapshot.
  std::vector<std::vector<uint8_t>> dump_slots() {
    Snapshot snap = snapshot();
    std::vector<std::vector<uint8_t>> out;
    out.reserve(dict_.cardinality());
    OpGuard guard(state_.domain);
    for (size_t k = 0; k < dict_.cardinality(); ++k) {
      SegmentedBitvector bits = evaluate_slot(static_cast<SlotId>(k) + 1, snap.start_ts);
      std::vector<uint8_t> raw = bits.to_bits();
      out.push_back(encode(raw).serialize());
    }
    return out;
  }

 private:
  static ValueDict make_dict(std::span<const Value> values, const IndexConfig& config,
                             std::vector<Value> explicit_domain) {
    std::vector<Value> domain = std::move(explicit_domain);
    if (domain.empty()) {
      domain.assign(values.begin(), values.end());
    }
    std::sort(domain.begin(), domain.end());
    domain.erase(std::unique(domain.begin(), domain.end()), domain.end());
    if (config.cardinality != 0 && domain.size() > config.cardinality) {
      throw ConfigError("domain exceeds the configured cardinality");
    }
    return ValueDict(std::move(domain));
  }

  SegmentedBitvector evaluate_range(Value lo, Value hi, Timestamp start_ts) {
    auto lo_slot = dict_.slot_of(lo);
    auto hi_slot = dict_.slot_of(hi);
    if (!lo_slot || !hi_slot || *lo_slot > *hi_slot) {
      throw DomainError("query predicate outside the value domain");
    }
    if (*lo_slot == *hi_slot) return evaluate_slot(*lo_slot, start_ts);
    std::vector<SegmentedBitvector> parts;
    parts.reserve(*hi_slot - *lo_slot + 1);
    for (SlotId s = *lo_slot; s <= *hi_slot; ++s) parts.push_back(evaluate_slot(s, start_ts));
    return combine(BitOp::Or, parts, executor());
  }

  /// `head` must have been read before `start_ts`; an operation that walks
  /// from a head advanced past its snapshot would miss window entries.
  std::optional<SlotId> lookup_value_inner(RowId row, Ule* head, Timestamp start_ts) {
    if (head->commit_ts > start_ts) {
      throw Error("snapshot predates the retained log prefix");
    }
    uint64_t rows_at = head->n_rows_after;
    PositionList empty_mask;
    const PositionList* mask = &empty_mask;
    auto entry = state_.log.collect_row(head, 0, start_ts, row, &rows_at);
    if (entry) mask = entry->positions;
    if (row >= rows_at) throw RangeError("row ordinal out of range at this snapshot");

    size_t c = dict_.cardinality();
    std::vector<uint8_t> hit(c, 0);
    auto probe = [&](size_t k) {
      SlotId slot = static_cast<SlotId>(k) + 1;
      VersionedVB* v = state_.chains[k].lookup(start_ts);
      bool bit = row < v->bits.n_rows() ? v->bits.get_bit(row) : false;
      if (mask->contains(slot)) bit = !bit;
      hit[k] = bit ? 1 : 0;
    };
    Executor* ex = executor();
    if (ex != nullptr && c >= 8) {
      ex->parallel_for(c, probe);
    } else {
      for (size_t k = 0; k < c; ++k) probe(k);
    }
    std::optional<SlotId> found;
    for (size_t k = 0; k < c; ++k) {
      if (hit[k]) {
        assert(!found && "row has more than one slot bit set");
        found = static_cast<SlotId>(k) + 1;
#ifdef NDEBUG
        break;
#endif
      }
    }
    return found;
  }

  /// Snapshot-consistent bits for one slot: version + window flips.
  SegmentedBitvector evaluate_slot(SlotId slot, Timestamp start_ts) {
    VersionChain& chain = state_.chains[slot - 1];
    VersionedVB* v = chain.lookup(start_ts);
    uint64_t rows_at = v->rows_at_floor;
    auto set = state_.log.collect(v->start_delta.load(std::memory_order_acquire), v->floor_ts,
                                  start_ts, slot, &rows_at);
    SegmentedBitvector bits = v->bits;
    if (rows_at > bits.n_rows()) bits = bits.extend_to(rows_at);
    if (!set.empty()) {
      std::vector<uint64_t> rows;
      rows.reserve(set.size());
      for (auto& c : set) rows.push_back(c.row);
      bits = bits.flip_rows(rows, executor());
      if (rows.size() > state_.config.merge_threshold &&
          state_.config.maintenance != MaintenanceMode::Off) {
        MergeRequest req{slot, start_ts, v->commit_ts,
                         std::make_shared<const SegmentedBitvector>(bits)};
        enqueue_merge(std::move(req));
      }
    }
    return bits;
  }

  void enqueue_merge(MergeRequest req) {
    if (state_.merge_queue.push(std::move(req))) {
      state_.stats.merge_requests.fetch_add(1, std::memory_order_relaxed);
    } else {
      state_.stats.merge_requests_dropped.fetch_add(1, std::memory_order_relaxed);
    }
  }

  Timestamp run_udi(RowId row, SlotId new_slot, bool is_delete) {
    for (;;) {
      std::optional<Timestamp> ts;
      {
        OpGuard guard(state_.domain);
        Ule* head = state_.log.head();  // read before the timestamp
        Timestamp start_ts = state_.timestamp.load();
        uint64_t rows_at = head->n_rows_after;
        Ule* from_pos = head;
        auto entry = state_.log.collect_row(head, 0, start_ts, row, &rows_at, &from_pos);
        if (row >= rows_at) throw RangeError("row ordinal out of range");
        PositionList prior;
        if (entry) prior = *entry->positions;

        std::optional<SlotId> old_slot = probe_slot(row, start_ts, prior);
        if (!old_slot) throw NotFoundError("row already deleted");

        Hud flip = is_delete ? hud_for_delete(row, *old_slot)
                             : hud_for_update(row, *old_slot, new_slot);
        Hud logged;
        logged.row = row;
        logged.positions = prior.xor_with(flip.positions);

        Ule* ule = state_.log.pool().acquire(UleKind::Udi);
        ule->huds.emplace_back(std::move(logged));
        CommitArgs args;
        args.ule = ule;
        args.from_pos = from_pos;
        args.start_ts = start_ts;
        args.conflict_rows = {row};
        ts = commit(state_, args);
        if (!ts) state_.log.pool().release(ule);
      }
      if (ts) return *ts;
      std::this_thread::yield();
    }
  }

  InsertResult run_insert(SlotId slot) {
    OpGuard guard(state_.domain);
    Ule* last = state_.log.tail();
    for (Ule* n = last->next.load(std::memory_order_acquire); n != nullptr;
         n = n->next.load(std::memory_order_acquire)) {
      last = n;
    }
    Ule* ule = state_.log.pool().acquire(UleKind::Udi);
    ule->huds.emplace_back(hud_for_insert(last->n_rows_after, slot));
    CommitArgs args;
    args.ule = ule;
    args.from_pos = last;
    args.start_ts = last->commit_ts;
    args.is_insert = true;
    auto ts = commit(state_, args);
    // Inserts carry no conflict rows, so the commit cannot be rejected.
    assert(ts.has_value());
    return {args.assigned_row, *ts};
  }

  std::optional<SlotId> probe_slot(RowId row, Timestamp start_ts, const PositionList& mask) {
    size_t c = dict_.cardinality();
    for (size_t k = 0; k < c; ++k) {
      SlotId slot = static_cast<SlotId>(k) + 1;
      VersionedVB* v = state_.chains[k].lookup(start_ts);
      bool bit = row < v->bits.n_rows() ? v->bits.get_bit(row) : false;
      if (mask.contains(slot)) bit = !bit;
      if (bit) return slot;
    }
    return std::nullopt;
  }

  void after_op() {
    if (state_.config.maintenance == MaintenanceMode::Inline) {
      maintenance_cycle(state_, executor(), true);
    }
  }

  void start_maintenance() {
    if (state_.config.maintenance != MaintenanceMode::Background) return;
    uint32_t n = state_.config.maintenance_threads;
    if (n == 0) {
      uint32_t ratio = state_.config.maint_ratio == 0 ? 4 : state_.config.maint_ratio;
      n = (state_.config.expected_workers + ratio - 1) / ratio;
      if (n == 0) n = 1;
    }
    for (uint32_t i = 0; i < n; ++i) {
      maintenance_threads_.emplace_back([this, i](std::stop_token st) {
        run_maintenance(state_, executor(), /*reclaim=*/i == 0, st);
      });
    }
  }

  void stop_maintenance() {
    for (auto& t : maintenance_threads_) t.request_stop();
    maintenance_threads_.clear();  // jthread joins on destruction
  }

  ValueDict dict_;
  SharedState state_;
  std::unique_ptr<PoolExecutor> pool_;
  uint64_t rows_per_segment_ = 1;
  std::vector<std::jthread> maintenance_threads_;
};

}  // namespace cubit
