#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cubit/bench.hpp"

using namespace cubit;

namespace {

std::vector<Value> domain_1_to(uint32_t c) {
  std::vector<Value> d;
  for (uint32_t v = 1; v <= c; ++v) d.push_back(v);
  return d;
}

std::vector<std::unique_ptr<SecondaryIndex>> all_families(const std::vector<Value>& initial,
                                                          uint32_t c) {
  IndexConfig cfg;
  cfg.maintenance = MaintenanceMode::Inline;
  cfg.merge_threshold = 6;
  cfg.query_fanout = 1;
  cfg.rows_per_segment = 64;
  cfg.sync = SyncVariant::Lk;
  std::vector<std::unique_ptr<SecondaryIndex>> out;
  out.push_back(std::make_unique<CubitIndex>(initial, cfg, domain_1_to(c)));
  cfg.sync = SyncVariant::Lf;
  out.push_back(std::make_unique<CubitIndex>(initial, cfg, domain_1_to(c)));
  out.push_back(std::make_unique<InPlaceIndex>(initial, domain_1_to(c)));
  out.push_back(std::make_unique<UcbIndex>(initial, domain_1_to(c)));
  out.push_back(std::make_unique<UpBitIndex>(initial, domain_1_to(c), 6));
  return out;
}

}  // namespace

TEST_CASE("all families agree bit-for-bit on random histories", "[baselines]") {
  std::mt19937_64 rng(61);
  for (int history = 0; history < 6; ++history) {
    uint32_t c = history % 2 == 0 ? 4 : 9;
    std::vector<Value> initial;
    uint64_t n0 = 32 + rng() % 100;
    for (uint64_t i = 0; i < n0; ++i) initial.push_back(static_cast<Value>(rng() % c + 1));
    auto indexes = all_families(initial, c);

    for (int op = 0; op < 600; ++op) {
      int kind = static_cast<int>(rng() % 12);
      uint64_t n = indexes[0]->row_count();
      if (kind < 5) {
        Value lo = static_cast<Value>(rng() % c + 1);
        Value hi = std::min<Value>(lo + static_cast<Value>(rng() % 3), c);
        auto expect = indexes[0]->query_ids(lo, hi);
        for (size_t f = 1; f < indexes.size(); ++f) {
          REQUIRE(indexes[f]->query_ids(lo, hi) == expect);
        }
      } else if (kind < 9) {
        RowId row = rng() % n;
        Value v = static_cast<Value>(rng() % c + 1);
        int outcome = -1;
        for (size_t f = 0; f < indexes.size(); ++f) {
          int got;
          try {
            indexes[f]->update(row, v);
            got = 0;
          } catch (const NoopUpdateError&) {
            got = 1;
          } catch (const NotFoundError&) {
            got = 2;
          }
          if (outcome < 0) outcome = got;
          REQUIRE(got == outcome);
        }
      } else if (kind < 10) {
        RowId row = rng() % n;
        int outcome = -1;
        for (size_t f = 0; f < indexes.size(); ++f) {
          int got;
          try {
            indexes[f]->remove(row);
            got = 0;
          } catch (const NotFoundError&) {
            got = 2;
          }
          if (outcome < 0) outcome = got;
          REQUIRE(got == outcome);
        }
      } else {
        Value v = static_cast<Value>(rng() % c + 1);
        RowId expect_row = 0;
        for (size_t f = 0; f < indexes.size(); ++f) {
          auto r = indexes[f]->insert(v);
          if (f == 0) expect_row = r.row;
          REQUIRE(r.row == expect_row);
        }
      }
      if (op % 97 == 0) {
        RowId row = rng() % indexes[0]->row_count();
        auto expect = indexes[0]->value_of(row);
        for (size_t f = 1; f < indexes.size(); ++f) REQUIRE(indexes[f]->value_of(row) == expect);
      }
    }
    for (Value v = 1; v <= static_cast<Value>(c); ++v) {
      auto expect = indexes[0]->query_ids(v, v);
      for (size_t f = 1; f < indexes.size(); ++f) REQUIRE(indexes[f]->query_ids(v, v) == expect);
    }
  }
}

TEST_CASE("UCB remaps updated rows to fresh physical rows", "[baselines]") {
  std::vector<Value> initial = {1, 2, 1, 2};
  UcbIndex ucb(initial, domain_1_to(2));
  CHECK(ucb.physical_rows() == 4);
  ucb.update(1, 1);
  // delete-then-append: one extra physical row, user row stable.
  CHECK(ucb.physical_rows() == 5);
  CHECK(ucb.row_count() == 4);
  CHECK(ucb.value_of(1) == 1);
  CHECK(ucb.query_ids(1, 1) == std::vector<RowId>{0, 1, 2});
  ucb.remove(1);
  CHECK(ucb.physical_rows() == 5);
  CHECK(ucb.value_of(1) == std::nullopt);
  CHECK(ucb.query_ids(1, 1) == std::vector<RowId>{0, 2});
}

TEST_CASE("In-place insert appends one bit to every slot", "[baselines]") {
  std::vector<Value> initial = {1, 2};
  InPlaceIndex ip(initial, domain_1_to(3));
  auto r = ip.insert(3);
  CHECK(r.row == 2);
  CHECK(ip.query_ids(3, 3) == std::vector<RowId>{2});
  CHECK(ip.query_ids(1, 3) == std::vector<RowId>{0, 1, 2});
  CHECK(ip.row_count() == 3);
}

TEST_CASE("UpBit merges a pair once its UB passes the threshold", "[baselines]") {
  std::vector<Value> initial(64, 1);
  UpBitIndex ub(initial, domain_1_to(2), 4);
  for (RowId r = 0; r < 6; ++r) ub.update(r, 2);
  CHECK(ub.pair_merges() == 0);
  auto ids = ub.query_ids(2, 2);  // read path merges opportunistically
  CHECK(ids == std::vector<RowId>{0, 1, 2, 3, 4, 5});
  CHECK(ub.pair_merges() > 0);
  CHECK(ub.query_ids(2, 2) == ids);
}

TEST_CASE("locking discipline counters", "[baselines]") {
  std::vector<Value> initial(32, 1);
  SECTION("baseline queries take shared latches") {
    InPlaceIndex ip(initial, domain_1_to(2));
    ip.query_ids(1, 1);
    ip.query_ids(1, 2);
    CHECK(ip.baseline_stats().query_shared_acquisitions.load() == 2);
    UcbIndex ucb(initial, domain_1_to(2));
    ucb.query_ids(1, 1);
    CHECK(ucb.baseline_stats().query_shared_acquisitions.load() == 1);
    UpBitIndex ub(initial, domain_1_to(2), 16);
    ub.query_ids(1, 1);
    CHECK(ub.baseline_stats().query_shared_acquisitions.load() == 1);
  }
  SECTION("cubit queries touch no commit latch") {
    IndexConfig cfg;
    cfg.maintenance = MaintenanceMode::Off;
    cfg.query_fanout = 1;
    CubitIndex idx(initial, cfg, domain_1_to(2));
    for (int i = 0; i < 50; ++i) idx.query_ids(1, 2);
    CHECK(idx.stats().query_path_latch_acquisitions == 0);
  }
}

TEST_CASE("baseline storms match the trace oracle", "[baselines][stress]") {
  for (const char* kind : {"inplace", "ucb", "upbit"}) {
    DYNAMIC_SECTION("index=" << kind) {
      bench::WorkloadSpec spec;
      spec.n_rows = 500;
      spec.cardinality = 8;
      spec.query_pct = 40;
      spec.update_pct = 40;
      spec.delete_pct = 10;
      spec.insert_pct = 10;
      spec.threads = 4;
      spec.ops = 4000;
      spec.seed = 77;
      spec.verify = true;
      auto initial = bench::generate(spec);
      auto handle = bench::make_index(kind, SyncVariant::Lk, initial, spec);
      bench::VerifyResult verdict;
      bench::run(spec, kind, SyncVariant::Lk, initial, handle, &verdict);
      INFO(verdict.divergence);
      REQUIRE(verdict.ok);
    }
  }
}
