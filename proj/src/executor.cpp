#include "dgcc/executor.hpp"

#include <algorithm>
#include <unordered_map>

#include "dgcc/error.hpp"

namespace dgcc {

void BatchConfig::validate() const {
  if (max_batch_size == 0) fail(ErrorCode::kUsage, "max batch size must be positive");
  if (constructor_count == 0) fail(ErrorCode::kUsage, "constructor count must be positive");
  if (worker_count == 0) fail(ErrorCode::kUsage, "worker count must be positive");
}

ExecutionState::ExecutionState(const DependencyGraph& graph)
    : graph_(graph),
      in_degree_(graph.vertex_count()),
      skipped_(graph.vertex_count(), 0),
      drained_(graph.vertex_count(), 0),
      outcomes_(graph.transaction_count(), Outcome::kCommitted) {
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    in_degree_[v] = graph.in_degree(v);
    if (in_degree_[v] == 0) frontier_.push_back(v);
  }
}

void ExecutionState::skip_propagate(VertexId failed_check) {
  outcomes_.at(graph_.vertex(failed_check).txn) = Outcome::kAborted;
  std::vector<VertexId> stack{failed_check};
  while (!stack.empty()) {
    VertexId v = stack.back();
    stack.pop_back();
    for (const auto& a : graph_.successors(v)) {
      if (a.kind != EdgeKind::kLogic || skipped_[a.vertex]) continue;
      skipped_[a.vertex] = 1;
      stack.push_back(a.vertex);
    }
  }
}

void ExecutionState::advance() {
  std::vector<VertexId> next;
  for (VertexId v : frontier_) {
    drained_[v] = 1;
    ++drained_count_;
    for (const auto& a : graph_.successors(v)) {
      if (--in_degree_[a.vertex] == 0) next.push_back(a.vertex);
    }
  }
  std::sort(next.begin(), next.end());
  frontier_ = std::move(next);
}

Dispatch small_frontier_dispatch(size_t frontier_size, const BatchConfig& cfg) noexcept {
  return frontier_size < cfg.frontier_threshold() || cfg.worker_count == 1
             ? Dispatch::kSingleWorker
             : Dispatch::kMultiWorker;
}

GraphExecutor::GraphExecutor(WorkerPool& pool, BatchConfig cfg, TraceRecorder* trace)
    : pool_(pool), cfg_(cfg), trace_(trace), per_worker_(pool.size(), 0) {
  cfg_.validate();
}

void GraphExecutor::run_vertex(const DependencyGraph& graph, Storage& storage, VertexId v,
                               std::vector<uint8_t>& check_failed,
                               std::vector<std::vector<TraceEvent>>* events) {
  const Vertex& vx = graph.vertex(v);
  const ChoppedTransaction& txn = graph.transaction(vx.txn);
  const TransactionPiece& piece = txn.pieces[vx.piece];
  DirectAccess direct(storage);
  DataAccess* access = &direct;
  std::optional<AuditingAccess> audit;
  std::optional<TracingAccess> tracing;
  if (cfg_.audit) access = &audit.emplace(*access, piece);
  if (events) access = &tracing.emplace(*access, *trace_, vx.ts, vx.piece, (*events)[v]);
  bool ok = txn.run_piece(vx.piece, *access);
  if (!ok) {
    if (piece.kind != PieceKind::kConditionCheck) {
      fail(ErrorCode::kScheduling, "normal piece " + std::to_string(vx.ts) + "." +
                                       std::to_string(vx.piece) + " reported failure");
    }
    check_failed[v] = 1;
  }
}

void GraphExecutor::audit_round(const DependencyGraph& graph, const std::vector<VertexId>& round,
                                const ExecutionState& state) const {
  struct Use {
    size_t writers = 0;
    size_t accessors = 0;
  };
  std::unordered_map<Key, Use, KeyHash> uses;
  for (VertexId v : round) {
    if (state.skipped(v)) continue;
    const TransactionPiece& p = graph.piece(v);
    for (const Key& k : p.accessset()) {
      Use& u = uses[k];
      ++u.accessors;
      if (p.writes(k)) ++u.writers;
      if (u.writers > 0 && u.accessors > 1) {
        fail(ErrorCode::kScheduling, "round executes conflicting pieces on key " + k.to_string());
      }
    }
  }
}

GraphResult GraphExecutor::execute(const DependencyGraph& graph, Storage& storage) {
  GraphResult result;
  ExecutionState state(graph);
  std::vector<uint8_t> check_failed(graph.vertex_count(), 0);
  std::vector<std::vector<TraceEvent>> events;
  if (trace_) events.resize(graph.vertex_count());
  auto* ev = trace_ ? &events : nullptr;

  std::vector<VertexId> runnable;
  while (!state.finished()) {
    const auto& frontier = state.frontier();
    if (frontier.empty()) {
      fail(ErrorCode::kScheduling, "no zero in-degree vertex left; graph has a cycle");
    }
    runnable.clear();
    for (VertexId v : frontier) {
      if (state.skipped(v)) {
        ++result.stats.skipped;
      } else {
        runnable.push_back(v);
      }
    }
    if (cfg_.audit) audit_round(graph, runnable, state);

    if (small_frontier_dispatch(runnable.size(), cfg_) == Dispatch::kSingleWorker) {
      for (VertexId v : runnable) run_vertex(graph, storage, v, check_failed, ev);
      per_worker_[0] += runnable.size();
      ++result.stats.single_worker_rounds;
    } else {
      pool_.parallel_for(runnable.size(), [&](size_t i, size_t worker) {
        run_vertex(graph, storage, runnable[i], check_failed, ev);
        ++per_worker_[worker];
      });
      ++result.stats.multi_worker_rounds;
    }
    for (VertexId v : runnable) {
      if (check_failed[v]) state.skip_propagate(v);
    }
    result.stats.executed += runnable.size();
    result.stats.round_sizes.push_back(frontier.size());
    ++result.stats.rounds;
    state.advance();
  }
  result.outcomes = state.outcomes();

  if (trace_) {
    for (uint32_t t = 0; t < graph.transaction_count(); ++t) {
      if (result.outcomes[t] != Outcome::kCommitted) continue;
      std::vector<TraceEvent> txn_events;
      for (uint32_t p = 0; p < graph.transaction(t).pieces.size(); ++p) {
        auto& e = events[graph.vertex_of(t, p)];
        txn_events.insert(txn_events.end(), e.begin(), e.end());
      }
      trace_->commit(std::move(txn_events));
    }
  }
  return result;
}

void TxnQueue::push(Transaction txn) {
  std::unique_lock lk(mu_);
  not_full_.wait(lk, [&] { return closed_ || q_.size() < depth_; });
  if (closed_) return;
  q_.push_back(std::move(txn));
}

bool TxnQueue::try_push(Transaction txn) {
  std::lock_guard lk(mu_);
  if (closed_ || q_.size() >= depth_) return false;
  q_.push_back(std::move(txn));
  return true;
}

std::vector<Transaction> TxnQueue::pop_batch(size_t max) {
  std::vector<Transaction> out;
  {
    std::lock_guard lk(mu_);
    size_t n = std::min(max, q_.size());
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
      out.push_back(std::move(q_.front()));
      q_.pop_front();
    }
  }
  not_full_.notify_all();
  return out;
}

size_t TxnQueue::size() const {
  std::lock_guard lk(mu_);
  return q_.size();
}

void TxnQueue::close() {
  {
    std::lock_guard lk(mu_);
    closed_ = true;
  }
  not_full_.notify_all();
}

std::vector<Transaction> admit_batch(TxnQueue& queue, const BatchConfig& cfg) {
  return queue.pop_batch(cfg.max_batch_size);
}

}  // namespace dgcc
