#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "cubit/bench.hpp"

using namespace cubit;
using namespace cubit::bench;

TEST_CASE("workload generation", "[bench]") {
  SECTION("uniform c=4 lands near 25% per value") {
    WorkloadSpec spec;
    spec.n_rows = 1'000'000;
    spec.cardinality = 4;
    spec.seed = 5;
    auto values = generate(spec);
    std::vector<uint64_t> counts(5, 0);
    for (Value v : values) counts[static_cast<size_t>(v)]++;
    for (int v = 1; v <= 4; ++v) {
      double frac = static_cast<double>(counts[v]) / static_cast<double>(spec.n_rows);
      CHECK(frac > 0.24);
      CHECK(frac < 0.26);
    }
  }
  SECTION("zipf alpha=1.5 puts 35-45% of mass on the top two values") {
    WorkloadSpec spec;
    spec.n_rows = 400'000;
    spec.cardinality = 100;
    spec.dist = Dist::Zipf;
    spec.zipf_alpha = 1.5;
    spec.seed = 6;
    auto values = generate(spec);
    std::vector<uint64_t> counts(spec.cardinality + 1, 0);
    for (Value v : values) counts[static_cast<size_t>(v)]++;
    std::sort(counts.begin(), counts.end(), std::greater<>());
    double top2 = static_cast<double>(counts[0] + counts[1]) / static_cast<double>(spec.n_rows);
    CHECK(top2 > 0.35);
    CHECK(top2 < 0.45);
  }
  SECTION("identical seeds give identical sequences") {
    WorkloadSpec spec;
    spec.n_rows = 10'000;
    spec.cardinality = 16;
    spec.dist = Dist::Zipf;
    spec.seed = 7;
    CHECK(generate(spec) == generate(spec));
    spec.seed = 8;
    CHECK(generate(spec) != generate(WorkloadSpec{}));
  }
  SECTION("bad specs are rejected") {
    WorkloadSpec spec;
    spec.query_pct = 50;  // mix no longer sums to 100
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    WorkloadSpec z;
    z.dist = Dist::Zipf;
    z.zipf_alpha = 0;
    CHECK_THROWS_AS(z.validate(), ConfigError);
  }
}

TEST_CASE("oracle_replay", "[bench]") {
  SECTION("an empty trace is the build state") {
    auto st = oracle_replay({1, 2, 1}, {});
    CHECK(st.query_ids(1, 1) == std::vector<RowId>{0, 2});
  }
  SECTION("the four-op scenario") {
    std::vector<Value> initial = {10, 20, 10, 30, 20, 20, 10, 30};
    std::vector<TraceOp> trace = {
        {TraceOp::Update, 1, 2, 20},
        {TraceOp::Update, 2, 5, 30},
        {TraceOp::Delete, 3, 7, 0},
        {TraceOp::Insert, 4, 8, 20},
    };
    auto st = oracle_replay(initial, trace);
    CHECK(st.row_count() == 9);
    CHECK(st.value_of(2) == 20);
    CHECK(st.value_of(5) == 30);
    CHECK(st.value_of(7) == std::nullopt);
    CHECK(st.value_of(8) == 20);
    CHECK(st.query_ids(20, 20) == std::vector<RowId>{1, 2, 4, 8});
  }
  SECTION("malformed traces are rejected") {
    CHECK_THROWS_AS(oracle_replay({1}, {{TraceOp::Insert, 1, 5, 1}}), Error);
    CHECK_THROWS_AS(oracle_replay({1}, {{TraceOp::Update, 2, 0, 1}, {TraceOp::Update, 1, 0, 1}}),
                    Error);
  }
}

TEST_CASE("single-threaded runs are deterministic and verified", "[bench]") {
  WorkloadSpec spec;
  spec.n_rows = 2000;
  spec.cardinality = 16;
  spec.query_pct = 60;
  spec.update_pct = 25;
  spec.delete_pct = 5;
  spec.insert_pct = 10;
  spec.threads = 1;
  spec.ops = 10'000;
  spec.seed = 9;
  spec.verify = true;
  auto initial = generate(spec);

  auto run_once = [&](std::vector<uint64_t>& final_counts) {
    auto handle = make_index("cubit", SyncVariant::Lk, initial, spec);
    VerifyResult verdict;
    auto stats = run(spec, "cubit", SyncVariant::Lk, initial, handle, &verdict);
    INFO(verdict.divergence);
    REQUIRE(verdict.ok);
    for (Value v = 1; v <= spec.cardinality; ++v) {
      final_counts.push_back(handle.index->query(v, v, false).digest.count);
    }
    return stats;
  };
  std::vector<uint64_t> counts_a, counts_b;
  auto sa = run_once(counts_a);
  auto sb = run_once(counts_b);
  CHECK(counts_a == counts_b);
  CHECK(sa.committed_udis == sb.committed_udis);
  CHECK(sa.queries == sb.queries);
}

TEST_CASE("multi-threaded lf run verifies and counts timestamps", "[bench]") {
  WorkloadSpec spec;
  spec.n_rows = 10'000;
  spec.cardinality = 32;
  spec.threads = 8;
  spec.ops = 100'000;
  spec.seed = 10;
  spec.verify = true;
  auto initial = generate(spec);
  IndexConfig cfg;
  cfg.maintenance = MaintenanceMode::Off;  // isolate UDI commits
  cfg.rows_per_segment = 512;
  cfg.query_fanout = 1;
  auto handle = make_index("cubit", SyncVariant::Lf, initial, spec, cfg);
  VerifyResult verdict;
  auto stats = run(spec, "cubit", SyncVariant::Lf, initial, handle, &verdict);
  INFO(verdict.divergence);
  REQUIRE(verdict.ok);
  CHECK(handle.cubit->shared().timestamp.load() == stats.committed_udis);
  CHECK(stats.counters.committed_ules == stats.committed_udis);
}

TEST_CASE("csv row shape", "[bench]") {
  RunStats rs;
  rs.index_name = "cubit";
  rs.variant = "lf";
  rs.threads = 8;
  rs.seconds = 2.0;
  rs.committed_udis = 100;
  rs.queries = 900;
  rs.query_lat_ns = {100, 200, 300};
  rs.udi_lat_ns = {1000, 2000, 4000};
  rs.counters.restarts = 3;
  rs.counters.helps = 5;
  CHECK(std::string(RunStats::csv_header()) ==
        "index,variant,threads,throughput,median_q,p99_q,median_udi,p99_udi,p99999_udi,"
        "restarts,helps");
  CHECK(rs.csv_row() == "cubit,lf,8,500,200,300,2000,4000,4000,3,5");
}

TEST_CASE("percentiles come from full samples", "[bench]") {
  std::vector<uint64_t> v;
  for (uint64_t i = 1; i <= 1000; ++i) v.push_back(i);
  CHECK(RunStats::percentile(v, 0.50) == 500);
  CHECK(RunStats::percentile(v, 0.99) == 990);
  CHECK(RunStats::percentile(v, 1.0) == 1000);
  std::vector<uint64_t> empty;
  CHECK(RunStats::percentile(empty, 0.5) == 0);
}
