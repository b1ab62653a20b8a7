#include "dgcc/engine.hpp"

#include "dgcc/error.hpp"

namespace dgcc {

DgccEngine::DgccEngine(const ProcedureRegistry& registry, Storage& storage, EngineOptions options)
    : registry_(registry),
      storage_(storage),
      options_(std::move(options)),
      next_graph_id_(options_.first_graph_id),
      next_ts_(options_.first_ts) {
  options_.batch.validate();
  if (options_.first_graph_id == 0 || options_.first_ts == 0) {
    fail(ErrorCode::kUsage, "graph ids and timestamps start at 1");
  }
  pool_ = std::make_unique<WorkerPool>(options_.batch.worker_count);
  executor_ = std::make_unique<GraphExecutor>(*pool_, options_.batch, options_.trace);
  for (size_t i = 0; i < options_.batch.constructor_count; ++i) {
    queues_.push_back(std::make_unique<TxnQueue>(1000 * options_.batch.worker_count));
  }
  if (options_.log_dir) {
    log_ = std::make_unique<LogWriter>(*options_.log_dir, options_.log);
    checkpoint_dir_ = options_.checkpoint_dir.value_or(*options_.log_dir / "checkpoints");
    checkpointer_ = std::make_unique<Checkpointer>(checkpoint_dir_);
    if (options_.initial_checkpoint) checkpoint_now();
  }
}

DgccEngine::~DgccEngine() {
  if (checkpointer_) checkpointer_->wait();
}

void DgccEngine::submit(Transaction txn) {
  TxnQueue& q = *queues_[next_queue_];
  next_queue_ = (next_queue_ + 1) % queues_.size();
  q.push(std::move(txn));
}

bool DgccEngine::try_submit(Transaction txn) {
  TxnQueue& q = *queues_[next_queue_];
  if (!q.try_push(std::move(txn))) return false;
  next_queue_ = (next_queue_ + 1) % queues_.size();
  return true;
}

size_t DgccEngine::pending() const {
  size_t n = 0;
  for (const auto& q : queues_) n += q->size();
  return n;
}

size_t DgccEngine::step(const CommitCallback& on_commit) {
  // Admission: each queue receives a contiguous timestamp range, in queue order.
  std::vector<std::vector<Transaction>> batches;
  size_t total = 0;
  for (auto& q : queues_) {
    auto b = admit_batch(*q, options_.batch);
    if (b.empty()) continue;
    for (auto& t : b) t.ts = next_ts_++;
    total += b.size();
    batches.push_back(std::move(b));
  }
  if (total == 0) return 0;

  std::vector<std::optional<DependencyGraph>> graphs(batches.size());
  std::vector<uint64_t> ids(batches.size());
  for (auto& id : ids) id = next_graph_id_++;
  pool_->parallel_for(batches.size(), [&](size_t i, size_t) {
    graphs[i].emplace(build_graph(registry_, batches[i], ids[i]));
  });

  std::vector<CommitNotice> notices;
  for (size_t i = 0; i < graphs.size(); ++i) {
    const DependencyGraph& g = *graphs[i];
    GraphResult res = executor_->execute(g, storage_);
    if (log_) {
      log_->log_graph(g);
      if (options_.verify_log) {
        DependencyGraph back = rebuild_graph(registry_, g.graph_id(), log_records(g));
        if (!same_structure(g, back)) {
          fail(ErrorCode::kDurability, "graph rebuilt from its log records differs");
        }
      }
    }
    notices.clear();
    notices.reserve(g.transaction_count());
    for (uint32_t t = 0; t < g.transaction_count(); ++t) {
      notices.push_back({batches[i][t].ts, res.outcomes[t], batches[i][t].arrival_time});
      if (res.outcomes[t] == Outcome::kCommitted) {
        ++stats_.committed;
      } else {
        ++stats_.condition_aborts;
      }
    }
    ++stats_.graphs;
    stats_.transactions += g.transaction_count();
    stats_.pieces += g.vertex_count();
    stats_.rounds += res.stats.rounds;
    ++stats_.rounds_per_graph[res.stats.rounds];
    if (log_) {
      stats_.flushes = log_->flushes();
      stats_.log_bytes = log_->bytes_written();
    }
    if (on_commit) on_commit(g.graph_id(), notices);
    ++graphs_since_checkpoint_;
    maybe_checkpoint();
  }
  if (storage_.pending_count() >= options_.compact_threshold) {
    storage_.compact();
    ++stats_.compactions;
  }
  return total;
}

void DgccEngine::drain(const CommitCallback& on_commit) {
  while (step(on_commit) > 0) {
  }
}

void DgccEngine::maybe_checkpoint() {
  if (!checkpointer_) return;
  stats_.checkpoints = sync_checkpoints_ + checkpointer_->completed();
  stats_.checkpoint_failures = checkpointer_->failed();
  if (options_.checkpoint_interval == 0 || graphs_since_checkpoint_ < options_.checkpoint_interval) {
    return;
  }
  if (checkpointer_->busy()) return;
  // The store is quiesced here: every graph up to next_graph_id_ - 1 is
  // executed and logged.
  CheckpointImage img =
      capture_checkpoint(storage_, options_.sections, next_graph_id_ - 1, next_ts_ - 1);
  if (checkpointer_->submit(std::move(img))) graphs_since_checkpoint_ = 0;
}

void DgccEngine::checkpoint_now() {
  if (!checkpointer_) fail(ErrorCode::kUsage, "checkpoints need a log directory");
  checkpointer_->wait();
  checkpoint(storage_, checkpoint_dir_, options_.sections, next_graph_id_ - 1, next_ts_ - 1);
  prune_checkpoints(checkpoint_dir_);
  graphs_since_checkpoint_ = 0;
  ++sync_checkpoints_;
  stats_.checkpoints = sync_checkpoints_ + checkpointer_->completed();
}

void DgccEngine::wait_checkpoints() {
  if (!checkpointer_) return;
  checkpointer_->wait();
  stats_.checkpoints = sync_checkpoints_ + checkpointer_->completed();
  stats_.checkpoint_failures = checkpointer_->failed();
}

}  // namespace dgcc
