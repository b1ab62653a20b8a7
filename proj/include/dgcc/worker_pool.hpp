#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dgcc {

// Fixed pool of `workers` threads; the calling thread acts as worker 0, so
// workers - 1 background threads are spawned. parallel_for is a barrier:
// it returns once every index has been processed.
class WorkerPool {
 public:
  using Task = std::function<void(size_t index, size_t worker)>;

  explicit WorkerPool(size_t workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  size_t size() const noexcept { return threads_.size() + 1; }

  // Rethrows the first exception raised by a task.
  void parallel_for(size_t n, const Task& task);

  // Number of parallel_for calls that woke background workers.
  size_t dispatches() const noexcept { return dispatches_.load(std::memory_order_relaxed); }

 private:
  struct Job {
    const Task* task;
    size_t n;
    std::atomic<size_t> next{0};
    std::mutex error_mu;
    std::exception_ptr error;
  };

  void worker_loop(size_t id);
  static void run(Job& job, size_t worker);

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  Job* job_ = nullptr;
  uint64_t generation_ = 0;
  size_t busy_ = 0;
  bool stop_ = false;
  std::atomic<size_t> dispatches_{0};
};

}  // namespace dgcc
