#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dgcc/executor.hpp"
#include "dgcc/recovery.hpp"
#include "dgcc/trace.hpp"
#include "dgcc/worker_pool.hpp"

namespace dgcc {

struct EngineOptions {
  BatchConfig batch;
  // Unset disables logging and checkpoints.
  std::optional<std::filesystem::path> log_dir;
  // Defaults to <log_dir>/checkpoints.
  std::optional<std::filesystem::path> checkpoint_dir;
  // Graphs between checkpoints; 0 keeps only the initial one.
  uint64_t checkpoint_interval = 0;
  size_t sections = 4;
  // Writes a synchronous checkpoint of the current store on construction.
  bool initial_checkpoint = true;
  LogWriterOptions log;
  // Rebuilds every logged graph from its records and compares structure.
  bool verify_log = false;
  TraceRecorder* trace = nullptr;
  uint64_t first_graph_id = 1;
  Timestamp first_ts = 1;
  // Compaction runs between graphs once this many deleted slots wait.
  size_t compact_threshold = 1024;
};

struct CommitNotice {
  Timestamp ts = 0;
  Outcome outcome = Outcome::kCommitted;
  Clock::time_point arrival_time{};
};

// Invoked once per graph, after its log flush.
using CommitCallback = std::function<void(uint64_t graph_id, std::span<const CommitNotice>)>;

struct EngineStats {
  uint64_t graphs = 0;
  uint64_t transactions = 0;
  uint64_t committed = 0;
  uint64_t condition_aborts = 0;
  // Aborts for any other reason; DGCC has none by construction.
  uint64_t conflict_aborts = 0;
  uint64_t pieces = 0;
  uint64_t rounds = 0;
  std::map<size_t, uint64_t> rounds_per_graph;  // rounds -> graphs
  uint64_t flushes = 0;
  uint64_t log_bytes = 0;
  uint64_t checkpoints = 0;
  uint64_t checkpoint_failures = 0;
  uint64_t compactions = 0;
  double mean_batch_size() const noexcept {
    return graphs == 0 ? 0.0 : static_cast<double>(transactions) / static_cast<double>(graphs);
  }
};

// Batch pipeline: n queues, n graphs built in parallel per admission round,
// graphs executed one at a time in id order, each logged before its commit
// notices are released.
class DgccEngine {
 public:
  DgccEngine(const ProcedureRegistry& registry, Storage& storage, EngineOptions options);
  ~DgccEngine();
  DgccEngine(const DgccEngine&) = delete;
  DgccEngine& operator=(const DgccEngine&) = delete;

  size_t queue_count() const noexcept { return queues_.size(); }
  TxnQueue& queue(size_t i) { return *queues_.at(i); }
  // Round-robin over the queues; blocks while the chosen queue is full.
  void submit(Transaction txn);
  bool try_submit(Transaction txn);
  size_t pending() const;

  // One admission round. Returns the number of transactions processed;
  // 0 when every queue was empty.
  size_t step(const CommitCallback& on_commit = {});
  // Steps until all queues are empty.
  void drain(const CommitCallback& on_commit = {});

  // Synchronous checkpoint at the current graph boundary.
  void checkpoint_now();
  // Waits for a background checkpoint write.
  void wait_checkpoints();

  const EngineStats& stats() const noexcept { return stats_; }
  uint64_t next_graph_id() const noexcept { return next_graph_id_; }
  Timestamp next_ts() const noexcept { return next_ts_; }
  WorkerPool& pool() noexcept { return *pool_; }

 private:
  void maybe_checkpoint();

  const ProcedureRegistry& registry_;
  Storage& storage_;
  EngineOptions options_;
  std::unique_ptr<WorkerPool> pool_;
  std::unique_ptr<GraphExecutor> executor_;
  std::vector<std::unique_ptr<TxnQueue>> queues_;
  std::unique_ptr<LogWriter> log_;
  std::unique_ptr<Checkpointer> checkpointer_;
  std::filesystem::path checkpoint_dir_;
  size_t next_queue_ = 0;
  uint64_t next_graph_id_;
  Timestamp next_ts_;
  uint64_t graphs_since_checkpoint_ = 0;
  uint64_t sync_checkpoints_ = 0;
  EngineStats stats_;
};

}  // namespace dgcc
