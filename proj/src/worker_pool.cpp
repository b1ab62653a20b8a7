#include "dgcc/worker_pool.hpp"

#include "dgcc/error.hpp"

namespace dgcc {

WorkerPool::WorkerPool(size_t workers) {
  if (workers == 0) fail(ErrorCode::kUsage, "worker count must be positive");
  threads_.reserve(workers - 1);
  for (size_t i = 1; i < workers; ++i) threads_.emplace_back([this, i] { worker_loop(i); });
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run(Job& job, size_t worker) {
  for (;;) {
    size_t i = job.next.fetch_add(1, std::memory_order_relaxed);
    if (i >= job.n) return;
    try {
      (*job.task)(i, worker);
    } catch (...) {
      std::lock_guard lk(job.error_mu);
      if (!job.error) job.error = std::current_exception();
    }
  }
}

void WorkerPool::worker_loop(size_t id) {
  uint64_t seen = 0;
  for (;;) {
    Job* job = nullptr;
    {
      std::unique_lock lk(mu_);
      work_cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      job = job_;
      if (!job) continue;  // that job already finished
      ++busy_;
    }
    run(*job, id);
    std::lock_guard lk(mu_);
    if (--busy_ == 0) done_cv_.notify_all();
  }
}

void WorkerPool::parallel_for(size_t n, const Task& task) {
  if (n == 0) return;
  Job job;
  job.task = &task;
  job.n = n;
  if (threads_.empty() || n == 1) {
    run(job, 0);
  } else {
    {
      std::lock_guard lk(mu_);
      job_ = &job;
      ++generation_;
    }
    dispatches_.fetch_add(1, std::memory_order_relaxed);
    work_cv_.notify_all();
    run(job, 0);
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [&] { return busy_ == 0; });
    job_ = nullptr;
  }
  if (job.error) std::rethrow_exception(job.error);
}

}  // namespace dgcc
