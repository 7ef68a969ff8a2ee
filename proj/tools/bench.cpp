// Microbenchmark driver over the four index families.
//
//   bench --index {cubit,upbit,ucb,inplace} --sync {lk,lf} --threads N
//         --rows N --card C --dist {uniform,zipf:ALPHA} --mix Q,U,D,I
//         --ops N --seed S --csv PATH --verify
//
// Prints a human-readable table to stdout; --csv appends one machine row per
// run. --verify replays the committed-op trace through the shadow oracle and
// exits nonzero on the first divergence.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cubit/bench.hpp"

#ifdef __linux__
#include <pthread.h>
#include <sched.h>
#endif

using namespace cubit;

namespace {

bench::Dist parse_dist(const std::string& s, double& alpha) {
  if (s == "uniform") return bench::Dist::Uniform;
  if (s.rfind("zipf", 0) == 0) {
    if (s.size() > 5 && s[4] == ':') alpha = std::stod(s.substr(5));
    return bench::Dist::Zipf;
  }
  throw ConfigError("unknown distribution: " + s);
}

void parse_mix(const std::string& s, bench::WorkloadSpec& spec) {
  std::istringstream is(s);
  std::string part;
  uint32_t vals[4] = {0, 0, 0, 0};
  for (int i = 0; i < 4 && std::getline(is, part, ','); ++i) {
    vals[i] = static_cast<uint32_t>(std::stoul(part));
  }
  spec.query_pct = vals[0];
  spec.update_pct = vals[1];
  spec.delete_pct = vals[2];
  spec.insert_pct = vals[3];
}

std::string fmt_ns(uint64_t ns) {
  std::ostringstream os;
  if (ns >= 1'000'000) {
    os << std::fixed << std::setprecision(2) << static_cast<double>(ns) / 1e6 << " ms";
  } else if (ns >= 1'000) {
    os << std::fixed << std::setprecision(2) << static_cast<double>(ns) / 1e3 << " us";
  } else {
    os << ns << " ns";
  }
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"updatable bitmap index microbenchmark"};

  std::string index_kind = "cubit";
  std::string sync_str = "lk";
  std::string dist_str = "uniform";
  std::string mix_str = "90,10,0,0";
  std::string csv_path;
  std::string dump_prefix;
  bench::WorkloadSpec spec;
  spec.n_rows = 10'000'000;
  spec.cardinality = 100;
  IndexConfig cfg;
  bool pin_cores = false;

  app.add_option("--index", index_kind, "index family")
      ->check(CLI::IsMember({"cubit", "upbit", "ucb", "inplace"}));
  app.add_option("--sync", sync_str, "cubit commit protocol")->check(CLI::IsMember({"lk", "lf"}));
  app.add_option("--threads", spec.threads, "worker threads");
  app.add_option("--rows", spec.n_rows, "initial rows");
  app.add_option("--card", spec.cardinality, "domain cardinality");
  app.add_option("--dist", dist_str, "uniform or zipf:ALPHA");
  app.add_option("--mix", mix_str, "query,update,delete,insert percentages");
  app.add_option("--range-width", spec.range_width, "slots per range query");
  app.add_option("--ops", spec.ops, "total operations");
  app.add_option("--seed", spec.seed, "workload seed");
  app.add_option("--csv", csv_path, "append one machine-readable row here");
  app.add_flag("--verify", spec.verify, "check against the shadow oracle");
  app.add_option("--merge-threshold", cfg.merge_threshold, "flipped bits before a merge request");
  app.add_option("--segments", cfg.segment_count, "segments per bitvector");
  app.add_option("--fanout", cfg.query_fanout, "worker lanes per query");
  app.add_option("--maint-ratio", cfg.maint_ratio, "worker threads per maintenance thread");
  app.add_option("--merge-queue-cap", cfg.merge_queue_cap, "bounded merge queue size");
  app.add_flag("--pin-cores", pin_cores, "bind the driver to core 0 (default off)");
  app.add_option("--dump", dump_prefix,
                 "write each slot's evaluated bitvector to PREFIX.slot<k>.wah");

  CLI11_PARSE(app, argc, argv);

  try {
    spec.dist = parse_dist(dist_str, spec.zipf_alpha);
    parse_mix(mix_str, spec);
    spec.validate();
    SyncVariant sync = sync_str == "lk" ? SyncVariant::Lk : SyncVariant::Lf;

    std::cerr << "generating " << spec.n_rows << " rows, cardinality " << spec.cardinality
              << "...\n";
    auto initial = bench::generate(spec);
    std::cerr << "building " << index_kind << " index...\n";
    auto handle = bench::make_index(index_kind, sync, initial, spec, cfg);

#ifdef __linux__
    if (pin_cores) {
      cpu_set_t set;
      CPU_ZERO(&set);
      CPU_SET(0, &set);
      pthread_setaffinity_np(pthread_self(), sizeof(set), &set);
    }
#else
    (void)pin_cores;
#endif

    bench::VerifyResult verdict;
    auto stats = bench::run(spec, index_kind, sync, initial, handle, &verdict);

    std::cout << "index      " << stats.index_name << " (" << stats.variant << ")\n"
              << "threads    " << stats.threads << "\n"
              << "ops        " << stats.committed_udis + stats.queries + stats.noops << " ("
              << stats.queries << " queries, " << stats.committed_udis << " UDIs, " << stats.noops
              << " no-ops)\n"
              << "elapsed    " << std::fixed << std::setprecision(3) << stats.seconds << " s\n"
              << "throughput " << static_cast<uint64_t>(stats.throughput()) << " ops/s\n";
    auto q = stats.query_lat_ns;
    auto u = stats.udi_lat_ns;
    std::cout << "query lat  median " << fmt_ns(bench::RunStats::percentile(q, 0.5)) << ", p99 "
              << fmt_ns(bench::RunStats::percentile(q, 0.99)) << "\n"
              << "udi lat    median " << fmt_ns(bench::RunStats::percentile(u, 0.5)) << ", p99 "
              << fmt_ns(bench::RunStats::percentile(u, 0.99)) << ", p99999 "
              << fmt_ns(bench::RunStats::percentile(u, 0.99999)) << "\n";
    if (handle.cubit != nullptr) {
      auto c = stats.counters;
      std::cout << "counters   restarts " << c.restarts << ", helps " << c.helps
                << ", consolidated " << c.consolidated_ops << " ops in "
                << c.consolidated_batches << " batches, merges " << c.merges_executed
                << ", reclaimed " << c.versions_reclaimed << " versions / " << c.ules_reclaimed
                << " ules\n"
                << "           commit-latch acquisitions on query paths: "
                << c.query_path_latch_acquisitions << "\n";
    }

    if (!csv_path.empty()) {
      bool fresh = !std::ifstream(csv_path).good();
      std::ofstream csv(csv_path, std::ios::app);
      if (fresh) csv << bench::RunStats::csv_header() << "\n";
      csv << stats.csv_row() << "\n";
    }

    if (!dump_prefix.empty() && handle.cubit != nullptr) {
      auto dumps = handle.cubit->dump_slots();
      for (size_t k = 0; k < dumps.size(); ++k) {
        std::ofstream out(dump_prefix + ".slot" + std::to_string(k + 1) + ".wah",
                          std::ios::binary);
        out.write(reinterpret_cast<const char*>(dumps[k].data()),
                  static_cast<std::streamsize>(dumps[k].size()));
      }
    }

    if (spec.verify) {
      if (!verdict.ok) {
        std::cerr << "VERIFICATION FAILED: " << verdict.divergence << "\n";
        return 1;
      }
      std::cout << "verification passed\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
