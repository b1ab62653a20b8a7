#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <vector>

#include "dgcc/graph.hpp"
#include "dgcc/trace.hpp"
#include "dgcc/worker_pool.hpp"

namespace dgcc {

struct BatchConfig {
  size_t max_batch_size = 1000;  // delta
  size_t constructor_count = 1;  // n parallel graph builders / queues
  size_t worker_count = 8;       // kappa
  // Frontiers smaller than this run on one worker; 0 means worker_count.
  size_t small_frontier_threshold = 0;
  // Checks declared access sets of every piece and round disjointness.
  bool audit = false;

  size_t frontier_threshold() const noexcept {
    return small_frontier_threshold == 0 ? worker_count : small_frontier_threshold;
  }
  // Throws Error(kUsage) when a field is zero.
  void validate() const;
};

enum class Outcome : uint8_t { kCommitted = 0, kAborted = 1 };

// Mutable per-execution view of a graph: in-degree copy, zero-in-degree
// frontier, skip marks.
class ExecutionState {
 public:
  explicit ExecutionState(const DependencyGraph& graph);

  // Vertices with in-degree 0 not yet drained, in vertex order.
  const std::vector<VertexId>& frontier() const noexcept { return frontier_; }
  bool finished() const noexcept { return drained_count_ == graph_.vertex_count(); }
  size_t remaining() const noexcept { return graph_.vertex_count() - drained_count_; }

  bool skipped(VertexId v) const { return skipped_.at(v) != 0; }
  bool drained(VertexId v) const { return drained_.at(v) != 0; }
  uint32_t in_degree(VertexId v) const { return in_degree_.at(v); }

  // Marks every vertex reachable over logic edges from a failed check as
  // skipped and aborts its transaction.
  void skip_propagate(VertexId failed_check);

  // Drains the whole current frontier and computes the next one.
  void advance();

  Outcome outcome(uint32_t txn) const { return outcomes_.at(txn); }
  const std::vector<Outcome>& outcomes() const noexcept { return outcomes_; }

 private:
  const DependencyGraph& graph_;
  std::vector<uint32_t> in_degree_;
  std::vector<uint8_t> skipped_;
  std::vector<uint8_t> drained_;
  std::vector<VertexId> frontier_;
  std::vector<Outcome> outcomes_;
  size_t drained_count_ = 0;
};

enum class Dispatch { kSingleWorker, kMultiWorker };

Dispatch small_frontier_dispatch(size_t frontier_size, const BatchConfig& cfg) noexcept;

struct ExecutionStats {
  size_t rounds = 0;
  size_t executed = 0;
  size_t skipped = 0;
  size_t single_worker_rounds = 0;
  size_t multi_worker_rounds = 0;
  std::vector<size_t> round_sizes;
};

struct GraphResult {
  std::vector<Outcome> outcomes;  // one per transaction, graph order
  ExecutionStats stats;
};

// Executes a graph round by round: select the zero-in-degree frontier, run it
// on the pool, wait, remove its out-edges. Throws Error(kScheduling) if the
// graph cannot drain.
class GraphExecutor {
 public:
  GraphExecutor(WorkerPool& pool, BatchConfig cfg, TraceRecorder* trace = nullptr);

  GraphResult execute(const DependencyGraph& graph, Storage& storage);

  // Pieces run per worker since construction.
  const std::vector<size_t>& pieces_per_worker() const noexcept { return per_worker_; }

 private:
  void run_vertex(const DependencyGraph& graph, Storage& storage, VertexId v,
                  std::vector<uint8_t>& check_failed, std::vector<std::vector<TraceEvent>>* events);
  void audit_round(const DependencyGraph& graph, const std::vector<VertexId>& round,
                   const ExecutionState& state) const;

  WorkerPool& pool_;
  BatchConfig cfg_;
  TraceRecorder* trace_;
  std::vector<size_t> per_worker_;
};

// FIFO of arrived transactions; push blocks while the queue holds `depth`
// entries.
class TxnQueue {
 public:
  explicit TxnQueue(size_t depth = 1000) : depth_(depth) {}

  void push(Transaction txn);
  bool try_push(Transaction txn);
  // Removes up to max transactions without waiting.
  std::vector<Transaction> pop_batch(size_t max);
  size_t size() const;
  size_t depth() const noexcept { return depth_; }
  // Unblocks pushers; later pushes are dropped.
  void close();

 private:
  size_t depth_;
  mutable std::mutex mu_;
  std::condition_variable not_full_;
  std::deque<Transaction> q_;
  bool closed_ = false;
};

// Returns min(queue length, max_batch_size) transactions in FIFO order.
std::vector<Transaction> admit_batch(TxnQueue& queue, const BatchConfig& cfg);

}  // namespace dgcc
