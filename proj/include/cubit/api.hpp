#pragma once

// Uniform secondary-index surface shared by the CUBIT index and the
// parallelized baseline indexes, so the bench driver and the
// cross-validation tests treat all four families identically.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cubit/delta.hpp"

namespace cubit {

using Value = int64_t;

struct InsertResult {
  RowId row;
  Timestamp ts;
};

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Order-independent digest of a row-id set: count plus xor of hashed ids.
struct ResultDigest {
  uint64_t count = 0;
  uint64_t hash = 0;

  void add(RowId r) {
    ++count;
    hash ^= splitmix64(r);
  }
  friend bool operator==(const ResultDigest&, const ResultDigest&) = default;
};

struct QueryOutcome {
  Timestamp start_ts = 0;
  ResultDigest digest;  // hash populated only when requested
};

class SecondaryIndex {
 public:
  virtual ~SecondaryIndex() = default;

  virtual std::string_view name() const = 0;
  virtual uint64_t row_count() const = 0;

  /// Inclusive range query ([v, v] for a point) over the evaluated index.
  virtual std::vector<RowId> query_ids(Value lo, Value hi) = 0;
  /// Count-only (and optionally hashed) form used by the bench driver.
  virtual QueryOutcome query(Value lo, Value hi, bool want_hash) = 0;

  /// Current value of a row, or nullopt if the row is deleted.
  virtual std::optional<Value> value_of(RowId row) = 0;

  virtual Timestamp update(RowId row, Value v) = 0;
  virtual Timestamp remove(RowId row) = 0;
  virtual InsertResult insert(Value v) = 0;
};

}  // namespace cubit
