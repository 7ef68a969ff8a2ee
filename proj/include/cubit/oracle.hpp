#pragma once

// Sequential shadow oracle: a plain array-of-values state machine replayed
// from a trace of committed operations, able to answer any query at any
// timestamp. This is the correctness reference for every index family.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cubit/api.hpp"
#include "cubit/errors.hpp"

namespace cubit {

struct TraceOp {
  enum Kind : uint8_t { Update, Delete, Insert } kind;
  Timestamp ts = 0;
  RowId row = 0;
  Value value = 0;  // new value (update/insert)
};

class OracleState {
 public:
  OracleState() = default;
  explicit OracleState(std::vector<Value> initial) {
    rows_.reserve(initial.size());
    for (Value v : initial) rows_.push_back(v);
  }

  uint64_t row_count() const { return rows_.size(); }

  std::optional<Value> value_of(RowId r) const {
    if (r >= rows_.size()) throw RangeError("oracle: row out of range");
    return rows_[r];
  }

  void apply(const TraceOp& op) {
    switch (op.kind) {
      case TraceOp::Update:
        if (op.row >= rows_.size() || !rows_[op.row]) {
          throw Error("oracle: update of a dead row at ts " + std::to_string(op.ts));
        }
        rows_[op.row] = op.value;
        break;
      case TraceOp::Delete:
        if (op.row >= rows_.size() || !rows_[op.row]) {
          throw Error("oracle: delete of a dead row at ts " + std::to_string(op.ts));
        }
        rows_[op.row] = std::nullopt;
        break;
      case TraceOp::Insert:
        if (op.row != rows_.size()) {
          throw Error("oracle: insert row " + std::to_string(op.row) + " out of order at ts " +
                      std::to_string(op.ts));
        }
        rows_.emplace_back(op.value);
        break;
    }
  }

  std::vector<RowId> query_ids(Value lo, Value hi) const {
    std::vector<RowId> out;
    for (RowId r = 0; r < rows_.size(); ++r) {
      if (rows_[r] && *rows_[r] >= lo && *rows_[r] <= hi) out.push_back(r);
    }
    return out;
  }

  ResultDigest digest(Value lo, Value hi) const {
    ResultDigest d;
    for (RowId r = 0; r < rows_.size(); ++r) {
      if (rows_[r] && *rows_[r] >= lo && *rows_[r] <= hi) d.add(r);
    }
    return d;
  }

  const std::vector<std::optional<Value>>& rows() const { return rows_; }

 private:
  std::vector<std::optional<Value>> rows_;
};

/// Replay a committed-op trace (must be sorted by ts) to a final state.
inline OracleState oracle_replay(std::vector<Value> initial, const std::vector<TraceOp>& trace) {
  OracleState st(std::move(initial));
  Timestamp prev = 0;
  for (const auto& op : trace) {
    if (op.ts < prev) throw Error("oracle: trace not sorted by commit timestamp");
    prev = op.ts;
    st.apply(op);
  }
  return st;
}

}  // namespace cubit
