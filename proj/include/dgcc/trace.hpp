#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <vector>

#include "dgcc/txmodel.hpp"

namespace dgcc {

enum class TraceOp : uint8_t { kRead = 0, kWrite = 1 };

struct TraceEvent {
  uint64_t seq = 0;  // global execution order
  Timestamp ts = 0;
  uint32_t piece = 0;
  Key key;
  TraceOp op = TraceOp::kRead;
};

// Committed events of one run, in arbitrary order until sorted().
class TraceRecorder {
 public:
  uint64_t next_seq() noexcept { return seq_.fetch_add(1, std::memory_order_relaxed) + 1; }

  // Appends the events of one committed transaction (or piece set).
  void commit(std::vector<TraceEvent>&& events);

  // Events ordered by seq.
  std::vector<TraceEvent> sorted() const;
  size_t size() const;
  void clear();

 private:
  std::atomic<uint64_t> seq_{0};
  mutable std::mutex mu_;
  std::vector<TraceEvent> events_;
};

// Records each access into `out` with a fresh sequence number, then forwards.
class TracingAccess final : public DataAccess {
 public:
  TracingAccess(DataAccess& inner, TraceRecorder& recorder, Timestamp ts, uint32_t piece,
                std::vector<TraceEvent>& out)
      : inner_(inner), recorder_(recorder), ts_(ts), piece_(piece), out_(out) {}

  std::optional<Record> read(const Key& key) override {
    auto r = inner_.read(key);
    note(key, TraceOp::kRead);
    return r;
  }
  void write(const Key& key, Record record) override {
    inner_.write(key, std::move(record));
    note(key, TraceOp::kWrite);
  }
  void insert(const Key& key, Record record) override {
    inner_.insert(key, std::move(record));
    note(key, TraceOp::kWrite);
  }
  void erase(const Key& key) override {
    inner_.erase(key);
    note(key, TraceOp::kWrite);
  }

 private:
  void note(const Key& key, TraceOp op) {
    out_.push_back(TraceEvent{recorder_.next_seq(), ts_, piece_, key, op});
  }

  DataAccess& inner_;
  TraceRecorder& recorder_;
  Timestamp ts_;
  uint32_t piece_;
  std::vector<TraceEvent>& out_;
};

}  // namespace dgcc
