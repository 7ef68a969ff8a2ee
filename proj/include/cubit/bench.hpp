#pragma once

// Workload generator, multi-threaded driver, and post-run verification
// against the sequential shadow oracle.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cubit/api.hpp"
#include "cubit/baselines.hpp"
#include "cubit/index.hpp"
#include "cubit/oracle.hpp"

namespace cubit::bench {

enum class Dist : uint8_t { Uniform, Zipf };

struct WorkloadSpec {
  uint64_t n_rows = 10'000'000;
  uint32_t cardinality = 100;
  Dist dist = Dist::Uniform;
  double zipf_alpha = 1.5;
  uint32_t query_pct = 90;
  uint32_t update_pct = 10;
  uint32_t delete_pct = 0;
  uint32_t insert_pct = 0;
  uint32_t range_width = 1;  // slots per range query
  uint32_t threads = 1;
  uint64_t ops = 100'000;
  uint64_t seed = 1;
  bool verify = false;

  void validate() const {
    if (query_pct + update_pct + delete_pct + insert_pct != 100) {
      throw ConfigError("op mix must sum to 100");
    }
    if (dist == Dist::Zipf && zipf_alpha <= 0) throw ConfigError("zipf alpha must be positive");
    if (cardinality == 0) throw ConfigError("cardinality must be positive");
    if (range_width == 0 || range_width > cardinality) {
      throw ConfigError("range width must be in [1, cardinality]");
    }
  }
};

/// Deterministic value source over the domain 1..c. The Zipfian variant is
/// rank-shifted (Zipf-Mandelbrot, shift 1): weight(k) = (k+1)^-alpha, which
/// at alpha = 1.5 puts roughly 40% of the mass on the two most popular
/// values while the tail stays near-uniform.
class ValueGen {
 public:
  ValueGen(Dist dist, uint32_t cardinality, double alpha) : dist_(dist), c_(cardinality) {
    if (dist_ == Dist::Zipf) {
      cdf_.reserve(c_);
      double acc = 0;
      for (uint32_t k = 1; k <= c_; ++k) {
        acc += std::pow(static_cast<double>(k) + 1.0, -alpha);
        cdf_.push_back(acc);
      }
      for (double& x : cdf_) x /= acc;
    }
  }

  Value operator()(std::mt19937_64& rng) const {
    if (dist_ == Dist::Uniform) return static_cast<Value>(rng() % c_ + 1);
    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<Value>(it - cdf_.begin()) + 1;
  }

 private:
  Dist dist_;
  uint32_t c_;
  std::vector<double> cdf_;
};

/// The initial dataset: n_rows values drawn from the configured distribution.
inline std::vector<Value> generate(const WorkloadSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  ValueGen gen(spec.dist, spec.cardinality, spec.zipf_alpha);
  std::vector<Value> out;
  out.reserve(spec.n_rows);
  for (uint64_t i = 0; i < spec.n_rows; ++i) out.push_back(gen(rng));
  return out;
}

inline std::vector<Value> domain_of(const WorkloadSpec& spec) {
  std::vector<Value> d;
  d.reserve(spec.cardinality);
  for (uint32_t v = 1; v <= spec.cardinality; ++v) d.push_back(static_cast<Value>(v));
  return d;
}

struct QueryRecord {
  Timestamp start_ts;
  Value lo, hi;
  ResultDigest digest;
};

struct RunStats {
  std::string index_name;
  std::string variant;
  uint32_t threads = 0;
  uint64_t committed_udis = 0;
  uint64_t queries = 0;
  uint64_t noops = 0;
  double seconds = 0;
  std::vector<uint64_t> query_lat_ns;
  std::vector<uint64_t> udi_lat_ns;
  StatsSnapshot counters;
  bool verified = false;

  double throughput() const {
    uint64_t total = committed_udis + queries + noops;
    return seconds > 0 ? static_cast<double>(total) / seconds : 0.0;
  }

  static uint64_t percentile(std::vector<uint64_t>& samples, double p) {
    if (samples.empty()) return 0;
    size_t k = static_cast<size_t>(std::ceil(p * static_cast<double>(samples.size())));
    if (k == 0) k = 1;
    if (k > samples.size()) k = samples.size();
    std::nth_element(samples.begin(), samples.begin() + (k - 1), samples.end());
    return samples[k - 1];
  }

  static std::string_view csv_header() {
    return "index,variant,threads,throughput,median_q,p99_q,median_udi,p99_udi,p99999_udi,"
           "restarts,helps";
  }

  std::string csv_row() {
    std::ostringstream os;
    os << index_name << ',' << variant << ',' << threads << ',' << static_cast<uint64_t>(throughput())
       << ',' << percentile(query_lat_ns, 0.50) << ',' << percentile(query_lat_ns, 0.99) << ','
       << percentile(udi_lat_ns, 0.50) << ',' << percentile(udi_lat_ns, 0.99) << ','
       << percentile(udi_lat_ns, 0.99999) << ',' << counters.restarts << ',' << counters.helps;
    return os.str();
  }
};

struct VerifyResult {
  bool ok = true;
  std::string divergence;
};

/// Replay the committed-op trace through the shadow oracle and check every
/// recorded query digest at its start_ts, then the final state.
inline VerifyResult verify_run(const std::vector<Value>& initial, std::vector<TraceOp> ops,
                               std::vector<QueryRecord> queries, SecondaryIndex& index,
                               uint32_t cardinality) {
  std::sort(ops.begin(), ops.end(), [](const TraceOp& a, const TraceOp& b) {
    if (a.ts != b.ts) return a.ts < b.ts;
    return a.row < b.row;
  });
  std::sort(queries.begin(), queries.end(),
            [](const QueryRecord& a, const QueryRecord& b) { return a.start_ts < b.start_ts; });

  OracleState oracle(initial);
  size_t oi = 0;
  VerifyResult out;
  auto fail = [&](const std::string& what) {
    out.ok = false;
    if (out.divergence.empty()) out.divergence = what;
  };
  for (const auto& q : queries) {
    while (oi < ops.size() && ops[oi].ts <= q.start_ts) {
      try {
        oracle.apply(ops[oi]);
      } catch (const Error& e) {
        fail(e.what());
        return out;
      }
      ++oi;
    }
    ResultDigest expect = oracle.digest(q.lo, q.hi);
    if (!(expect == q.digest)) {
      fail("query at start_ts " + std::to_string(q.start_ts) + " on [" + std::to_string(q.lo) +
           "," + std::to_string(q.hi) + "]: index {count " + std::to_string(q.digest.count) +
           "} vs oracle {count " + std::to_string(expect.count) + "}");
      return out;
    }
  }
  while (oi < ops.size()) {
    try {
      oracle.apply(ops[oi]);
    } catch (const Error& e) {
      fail(e.what());
      return out;
    }
    ++oi;
  }
  // Final state: every slot bit-for-bit (by digest and by count).
  for (uint32_t v = 1; v <= cardinality; ++v) {
    ResultDigest expect = oracle.digest(v, v);
    ResultDigest got;
    for (RowId r : index.query_ids(v, v)) got.add(r);
    if (!(expect == got)) {
      fail("final state of value " + std::to_string(v) + ": index count " +
           std::to_string(got.count) + " vs oracle " + std::to_string(expect.count));
      return out;
    }
  }
  if (oracle.row_count() != index.row_count()) {
    fail("final row count mismatch");
  }
  return out;
}

struct IndexHandle {
  std::unique_ptr<SecondaryIndex> index;
  CubitIndex* cubit = nullptr;  // non-null for the cubit families
};

inline IndexHandle make_index(const std::string& kind, SyncVariant sync,
                              const std::vector<Value>& initial, const WorkloadSpec& spec,
                              IndexConfig cfg = {}) {
  IndexHandle h;
  if (kind == "cubit") {
    cfg.sync = sync;
    cfg.expected_workers = spec.threads;
    if (cfg.cardinality == 0) cfg.cardinality = spec.cardinality;
    auto idx = std::make_unique<CubitIndex>(initial, cfg, domain_of(spec));
    h.cubit = idx.get();
    h.index = std::move(idx);
  } else if (kind == "inplace") {
    h.index = std::make_unique<InPlaceIndex>(initial, domain_of(spec));
  } else if (kind == "ucb") {
    h.index = std::make_unique<UcbIndex>(initial, domain_of(spec));
  } else if (kind == "upbit") {
    h.index = std::make_unique<UpBitIndex>(initial, domain_of(spec), cfg.merge_threshold);
  } else {
    throw ConfigError("unknown index kind: " + kind);
  }
  return h;
}

/// Drive `spec.ops` operations across `spec.threads` workers and gather
/// full-sample latency statistics. With spec.verify, every query digest and
/// the final state are checked against the shadow oracle; a failed
/// verification is reported in the returned stats (verified == false).
inline RunStats run(const WorkloadSpec& spec, const std::string& kind, SyncVariant sync,
                    const std::vector<Value>& initial, IndexHandle& handle,
                    VerifyResult* verdict = nullptr) {
  spec.validate();
  SecondaryIndex& index = *handle.index;

  struct WorkerOut {
    std::vector<TraceOp> trace;
    std::vector<QueryRecord> queries;
    std::vector<uint64_t> q_lat, udi_lat;
    uint64_t noops = 0;
    uint64_t queries_run = 0;
  };
  std::vector<WorkerOut> outs(spec.threads);
  std::atomic<uint32_t> ready{0};
  std::atomic<bool> go{false};

  auto worker = [&](uint32_t tid) {
    WorkerOut& out = outs[tid];
    std::mt19937_64 rng(splitmix64(spec.seed * 1315423911u + tid));
    ValueGen gen(spec.dist, spec.cardinality, spec.zipf_alpha);
    uint64_t my_ops = spec.ops / spec.threads + (tid < spec.ops % spec.threads ? 1 : 0);
    out.trace.reserve(my_ops / 4);
    ready.fetch_add(1);
    while (!go.load(std::memory_order_acquire)) std::this_thread::yield();
    for (uint64_t i = 0; i < my_ops; ++i) {
      uint32_t pick = static_cast<uint32_t>(rng() % 100);
      auto t0 = std::chrono::steady_clock::now();
      auto lat = [&] {
        return static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(
                                         std::chrono::steady_clock::now() - t0)
                                         .count());
      };
      try {
        if (pick < spec.query_pct) {
          Value lo = gen(rng);
          Value hi = lo + spec.range_width - 1;
          if (hi > static_cast<Value>(spec.cardinality)) hi = spec.cardinality;
          QueryOutcome q = index.query(lo, hi, spec.verify);
          out.q_lat.push_back(lat());
          ++out.queries_run;
          if (spec.verify) out.queries.push_back({q.start_ts, lo, hi, q.digest});
        } else if (pick < spec.query_pct + spec.update_pct) {
          uint64_t n = index.row_count();
          if (n == 0) {
            ++out.noops;
            continue;
          }
          RowId row = rng() % n;
          Value v = gen(rng);
          Timestamp ts = index.update(row, v);
          out.udi_lat.push_back(lat());
          out.trace.push_back({TraceOp::Update, ts, row, v});
        } else if (pick < spec.query_pct + spec.update_pct + spec.delete_pct) {
          uint64_t n = index.row_count();
          if (n == 0) {
            ++out.noops;
            continue;
          }
          RowId row = rng() % n;
          Timestamp ts = index.remove(row);
          out.udi_lat.push_back(lat());
          out.trace.push_back({TraceOp::Delete, ts, row, 0});
        } else {
          Value v = gen(rng);
          InsertResult r = index.insert(v);
          out.udi_lat.push_back(lat());
          out.trace.push_back({TraceOp::Insert, r.ts, r.row, v});
        }
      } catch (const NoopUpdateError&) {
        ++out.noops;
      } catch (const NotFoundError&) {
        ++out.noops;
      } catch (const RangeError&) {
        ++out.noops;  // row disappeared between pick and execution
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(spec.threads);
  for (uint32_t t = 0; t < spec.threads; ++t) threads.emplace_back(worker, t);
  while (ready.load() != spec.threads) std::this_thread::yield();
  auto t0 = std::chrono::steady_clock::now();
  go.store(true, std::memory_order_release);
  for (auto& t : threads) t.join();
  auto t1 = std::chrono::steady_clock::now();

  RunStats rs;
  rs.index_name = kind;
  rs.variant = kind == "cubit" ? (sync == SyncVariant::Lk ? "lk" : "lf") : "-";
  rs.threads = spec.threads;
  rs.seconds = std::chrono::duration<double>(t1 - t0).count();
  std::vector<TraceOp> all_ops;
  std::vector<QueryRecord> all_queries;
  for (auto& o : outs) {
    rs.committed_udis += o.trace.size();
    rs.queries += o.queries_run;
    rs.noops += o.noops;
    rs.query_lat_ns.insert(rs.query_lat_ns.end(), o.q_lat.begin(), o.q_lat.end());
    rs.udi_lat_ns.insert(rs.udi_lat_ns.end(), o.udi_lat.begin(), o.udi_lat.end());
    all_ops.insert(all_ops.end(), o.trace.begin(), o.trace.end());
    all_queries.insert(all_queries.end(), o.queries.begin(), o.queries.end());
  }
  if (handle.cubit != nullptr) rs.counters = handle.cubit->stats();

  if (spec.verify) {
    VerifyResult v = verify_run(initial, std::move(all_ops), std::move(all_queries), index,
                                spec.cardinality);
    rs.verified = v.ok;
    if (verdict != nullptr) *verdict = v;
  }
  return rs;
}

}  // namespace cubit::bench
