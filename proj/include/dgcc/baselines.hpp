#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dgcc/executor.hpp"
#include "dgcc/trace.hpp"
#include "dgcc/txmodel.hpp"

namespace dgcc {

enum class Protocol { kDgcc, kTwoPhaseLocking, kOcc, kMvcc };
const char* protocol_name(Protocol p) noexcept;
// Accepts dgcc, 2pl, occ, mvcc.
std::optional<Protocol> parse_protocol(const std::string& name) noexcept;

enum class AbortCause : uint8_t { kNone, kDeadlock, kValidation, kWriteConflict, kConditionCheck };
const char* abort_cause_name(AbortCause c) noexcept;

// Shared timestamp source for the optimistic baselines; strictly increasing.
class TimestampOracle {
 public:
  explicit TimestampOracle(Timestamp last = 0) : last_(last) {}
  Timestamp next() noexcept { return last_.fetch_add(1, std::memory_order_relaxed) + 1; }
  Timestamp last() const noexcept { return last_.load(std::memory_order_relaxed); }

 private:
  std::atomic<Timestamp> last_;
};

// Thrown out of piece bodies when the protocol aborts the running attempt.
struct TxnAborted {
  AbortCause cause;
};

// One attempt of one transaction. Reads and writes go through the
// protocol; writes are buffered until commit.
class BaselineTxn : public DataAccess {
 public:
  // Trace events recorded from here on carry this piece index.
  void set_piece(uint32_t piece) noexcept { piece_ = piece; }
  Timestamp ts() const noexcept { return ts_; }
  // kNone on success, which also publishes the trace events; otherwise
  // the attempt is rolled back.
  virtual AbortCause commit() = 0;
  virtual void abort() = 0;
  uint64_t commit_seq() const noexcept { return commit_seq_; }

 protected:
  explicit BaselineTxn(Timestamp ts) : ts_(ts) {}
  Timestamp ts_;
  uint32_t piece_ = 0;
  uint64_t commit_seq_ = 0;
  std::vector<TraceEvent> events_;
  // Buffered upserts; nullopt deletes.
  std::map<Key, std::optional<Record>> writes_;

  friend class BaselineEngine;
};

struct BaselineOptions {
  TraceRecorder* trace = nullptr;
  // Shared across engines when set; otherwise each engine owns one.
  TimestampOracle* clock = nullptr;
  // A 2PL waiter runs deadlock detection after blocking this long.
  std::chrono::microseconds deadlock_delay{200};
  // MVCC commits between garbage-collection passes; 0 disables them.
  uint64_t gc_interval = 4096;
  // Upper bound on attempts per transaction; 0 means unbounded.
  uint32_t max_attempts = 0;
};

struct TxnResult {
  Timestamp ts = 0;
  Outcome outcome = Outcome::kCommitted;
  // Condition-check for a final abort; otherwise the last retried cause.
  AbortCause cause = AbortCause::kNone;
  uint32_t retries = 0;
  // Global commit order, 0 when aborted.
  uint64_t commit_seq = 0;
};

struct BaselineStats {
  uint64_t committed = 0;
  uint64_t condition_aborts = 0;
  uint64_t deadlock_aborts = 0;
  uint64_t validation_aborts = 0;
  uint64_t write_conflict_aborts = 0;
  uint64_t lock_waits = 0;
  uint64_t gc_passes = 0;
  uint64_t conflict_aborts() const noexcept {
    return deadlock_aborts + validation_aborts + write_conflict_aborts;
  }
};

// Interface shared by the three baselines. One worker thread runs one
// transaction to completion; run() is safe to call concurrently.
class BaselineEngine {
 public:
  BaselineEngine(const ProcedureRegistry& registry, Storage& storage, BaselineOptions options);
  virtual ~BaselineEngine() = default;
  BaselineEngine(const BaselineEngine&) = delete;
  BaselineEngine& operator=(const BaselineEngine&) = delete;

  virtual Protocol protocol() const noexcept = 0;
  // Starts one attempt. ts = 0 draws a fresh timestamp.
  virtual std::unique_ptr<BaselineTxn> begin(Timestamp ts) = 0;

  // Executes pieces in index order, retrying conflict aborts with the
  // original timestamp. A failed condition check aborts for good.
  TxnResult run(const Transaction& txn);
  // Same, on an already chopped transaction.
  TxnResult run(const ChoppedTransaction& txn);

  Timestamp next_ts() { return clock_->next(); }
  TimestampOracle& clock() noexcept { return *clock_; }
  BaselineStats stats() const;
  Storage& storage() noexcept { return storage_; }

 protected:
  // Records a committed attempt's events and counts the commit.
  void publish(BaselineTxn& txn);
  uint64_t next_commit_seq() noexcept { return commit_seq_.fetch_add(1) + 1; }
  uint64_t trace_seq() { return options_.trace ? options_.trace->next_seq() : 0; }

  const ProcedureRegistry& registry_;
  Storage& storage_;
  BaselineOptions options_;
  std::unique_ptr<TimestampOracle> own_clock_;
  TimestampOracle* clock_;
  std::atomic<uint64_t> commit_seq_{0};
  std::atomic<uint64_t> committed_{0}, condition_{0}, deadlock_{0}, validation_{0},
      write_conflict_{0}, lock_waits_{0}, gc_passes_{0};
};

// Throws Error(kUsage) for kDgcc and for MVCC over single-version storage.
std::unique_ptr<BaselineEngine> make_baseline(Protocol protocol, const ProcedureRegistry& registry,
                                              Storage& storage, BaselineOptions options = {});

}  // namespace dgcc
