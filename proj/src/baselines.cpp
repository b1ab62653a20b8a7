#include "dgcc/baselines.hpp"

#include <algorithm>
#include <array>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "dgcc/error.hpp"

namespace dgcc {

const char* protocol_name(Protocol p) noexcept {
  switch (p) {
    case Protocol::kDgcc: return "dgcc";
    case Protocol::kTwoPhaseLocking: return "2pl";
    case Protocol::kOcc: return "occ";
    case Protocol::kMvcc: return "mvcc";
  }
  return "?";
}

std::optional<Protocol> parse_protocol(const std::string& name) noexcept {
  for (Protocol p : {Protocol::kDgcc, Protocol::kTwoPhaseLocking, Protocol::kOcc, Protocol::kMvcc}) {
    if (name == protocol_name(p)) return p;
  }
  return std::nullopt;
}

const char* abort_cause_name(AbortCause c) noexcept {
  switch (c) {
    case AbortCause::kNone: return "none";
    case AbortCause::kDeadlock: return "deadlock";
    case AbortCause::kValidation: return "validation";
    case AbortCause::kWriteConflict: return "write_conflict";
    case AbortCause::kConditionCheck: return "condition_check";
  }
  return "?";
}

BaselineEngine::BaselineEngine(const ProcedureRegistry& registry, Storage& storage,
                               BaselineOptions options)
    : registry_(registry), storage_(storage), options_(options) {
  if (options_.clock) {
    clock_ = options_.clock;
  } else {
    own_clock_ = std::make_unique<TimestampOracle>();
    clock_ = own_clock_.get();
  }
}

BaselineStats BaselineEngine::stats() const {
  BaselineStats s;
  s.committed = committed_.load();
  s.condition_aborts = condition_.load();
  s.deadlock_aborts = deadlock_.load();
  s.validation_aborts = validation_.load();
  s.write_conflict_aborts = write_conflict_.load();
  s.lock_waits = lock_waits_.load();
  s.gc_passes = gc_passes_.load();
  return s;
}

void BaselineEngine::publish(BaselineTxn& txn) {
  if (options_.trace && !txn.events_.empty()) options_.trace->commit(std::move(txn.events_));
  txn.events_.clear();
  ++committed_;
}

TxnResult BaselineEngine::run(const Transaction& txn) {
  Transaction t = txn;
  if (t.ts == 0) t.ts = clock_->next();
  return run(chop(registry_, t));
}

TxnResult BaselineEngine::run(const ChoppedTransaction& c) {
  TxnResult res;
  res.ts = c.ts;
  for (uint32_t attempt = 0;; ++attempt) {
    std::unique_ptr<BaselineTxn> txn = begin(c.ts);
    AbortCause cause = AbortCause::kNone;
    bool check_failed = false;
    try {
      for (uint32_t i = 0; i < c.pieces.size(); ++i) {
        txn->set_piece(i);
        if (c.run_piece(i, *txn)) continue;
        if (c.pieces[i].kind != PieceKind::kConditionCheck) {
          fail(ErrorCode::kScheduling, "normal piece returned false");
        }
        check_failed = true;
        break;
      }
    } catch (const TxnAborted& a) {
      cause = a.cause;
    }
    if (check_failed) {
      txn->abort();
      ++condition_;
      res.outcome = Outcome::kAborted;
      res.cause = AbortCause::kConditionCheck;
      return res;
    }
    if (cause == AbortCause::kNone) {
      cause = txn->commit();
    } else {
      txn->abort();
    }
    if (cause == AbortCause::kNone) {
      res.outcome = Outcome::kCommitted;
      res.commit_seq = txn->commit_seq();
      return res;
    }
    ++res.retries;
    res.cause = cause;
    if (options_.max_attempts != 0 && attempt + 1 >= options_.max_attempts) {
      res.outcome = Outcome::kAborted;
      return res;
    }
    txn.reset();
    if (attempt < 4) {
      std::this_thread::yield();
    } else {
      std::this_thread::sleep_for(std::chrono::microseconds(std::min<uint32_t>(10 * (attempt - 3), 1000)));
    }
  }
}

namespace {

// ---- two-phase locking ----

enum class LockMode : uint8_t { kShared, kExclusive };

struct LockCtx {
  Timestamp ts = 0;
  std::atomic<bool> victim{false};
  // Guarded by the mutex of shard waiting_shard.
  std::optional<Key> waiting;
  LockMode waiting_mode = LockMode::kShared;
  std::atomic<int> waiting_shard{-1};
  std::unordered_map<Key, LockMode, KeyHash> held;
};

struct LockRequest {
  LockCtx* ctx;
  LockMode mode;
};

struct LockEntry {
  LockMode mode = LockMode::kShared;
  std::vector<LockCtx*> holders;
  std::deque<LockRequest> waiters;
};

struct LockShard {
  std::mutex mu;
  std::condition_variable cv;
  std::unordered_map<Key, LockEntry, KeyHash> entries;
};

class LockTable {
 public:
  static constexpr size_t kShards = 256;

  LockTable(std::chrono::microseconds delay, std::atomic<uint64_t>& waits,
            std::atomic<uint64_t>& deadlocks)
      : delay_(delay), waits_(waits), deadlocks_(deadlocks) {}

  void enlist(LockCtx* c) {
    std::lock_guard lk(active_mu_);
    active_.insert(c);
  }
  void delist(LockCtx* c) {
    std::lock_guard lk(active_mu_);
    active_.erase(c);
  }

  // Throws TxnAborted{kDeadlock} when chosen as a deadlock victim.
  void acquire(LockCtx& ctx, const Key& key, LockMode mode) {
    auto held = ctx.held.find(key);
    if (held != ctx.held.end() && (held->second == LockMode::kExclusive || mode == LockMode::kShared)) {
      return;
    }
    bool upgrade = held != ctx.held.end();
    size_t si = KeyHash{}(key) % kShards;
    LockShard& sh = shards_[si];
    std::unique_lock lk(sh.mu);
    LockEntry& e = sh.entries[key];
    if ((e.waiters.empty() || upgrade) && grantable(e, &ctx, mode)) {
      grant(e, ctx, mode, upgrade);
      ctx.held[key] = mode;
      return;
    }
    if (upgrade) {
      e.waiters.push_front({&ctx, mode});
    } else {
      e.waiters.push_back({&ctx, mode});
    }
    ctx.waiting = key;
    ctx.waiting_mode = mode;
    ctx.waiting_shard.store(static_cast<int>(si));
    ++waits_;
    for (;;) {
      if (ctx.victim.load()) {
        auto it = std::find_if(e.waiters.begin(), e.waiters.end(),
                               [&](const LockRequest& r) { return r.ctx == &ctx; });
        e.waiters.erase(it);
        clear_wait(ctx);
        if (e.holders.empty() && e.waiters.empty()) sh.entries.erase(key);
        sh.cv.notify_all();
        ++deadlocks_;
        throw TxnAborted{AbortCause::kDeadlock};
      }
      if (e.waiters.front().ctx == &ctx && grantable(e, &ctx, mode)) {
        e.waiters.pop_front();
        grant(e, ctx, mode, upgrade);
        ctx.held[key] = mode;
        clear_wait(ctx);
        sh.cv.notify_all();
        return;
      }
      if (sh.cv.wait_for(lk, delay_) == std::cv_status::timeout) {
        lk.unlock();
        detect(ctx);
        lk.lock();
      }
    }
  }

  void release_all(LockCtx& ctx) {
    for (const auto& [key, mode] : ctx.held) {
      LockShard& sh = shards_[KeyHash{}(key) % kShards];
      std::lock_guard lk(sh.mu);
      auto it = sh.entries.find(key);
      if (it == sh.entries.end()) continue;
      LockEntry& e = it->second;
      e.holders.erase(std::remove(e.holders.begin(), e.holders.end(), &ctx), e.holders.end());
      if (e.holders.empty()) e.mode = LockMode::kShared;
      if (e.holders.empty() && e.waiters.empty()) sh.entries.erase(it);
      sh.cv.notify_all();
    }
    ctx.held.clear();
  }

 private:
  static bool grantable(const LockEntry& e, const LockCtx* ctx, LockMode mode) {
    if (e.holders.empty()) return true;
    if (mode == LockMode::kShared) return e.mode == LockMode::kShared;
    return e.holders.size() == 1 && e.holders[0] == ctx;
  }

  static void grant(LockEntry& e, LockCtx& ctx, LockMode mode, bool upgrade) {
    if (upgrade) {
      e.mode = LockMode::kExclusive;
      return;
    }
    if (e.holders.empty()) e.mode = mode;
    e.holders.push_back(&ctx);
  }

  static void clear_wait(LockCtx& ctx) {
    ctx.waiting.reset();
    ctx.waiting_shard.store(-1);
  }

  // Builds the wait-for graph and, if `self` is on a cycle, marks the
  // youngest member of that cycle as the victim.
  void detect(LockCtx& self) {
    std::lock_guard dl(detect_mu_);
    std::lock_guard al(active_mu_);
    std::unordered_map<LockCtx*, std::vector<LockCtx*>> edges;
    for (LockCtx* w : active_) {
      int si = w->waiting_shard.load();
      if (si < 0) continue;
      LockShard& sh = shards_[static_cast<size_t>(si)];
      std::lock_guard lk(sh.mu);
      if (w->waiting_shard.load() != si || !w->waiting) continue;
      auto it = sh.entries.find(*w->waiting);
      if (it == sh.entries.end()) continue;
      const LockEntry& e = it->second;
      bool excl = w->waiting_mode == LockMode::kExclusive;
      auto& out = edges[w];
      for (LockCtx* h : e.holders) {
        if (h != w && (excl || e.mode == LockMode::kExclusive)) out.push_back(h);
      }
      for (const auto& r : e.waiters) {
        if (r.ctx == w) break;
        if (excl || r.mode == LockMode::kExclusive) out.push_back(r.ctx);
      }
    }
    std::vector<LockCtx*> cycle;
    std::unordered_set<LockCtx*> visited;
    std::vector<std::pair<LockCtx*, size_t>> stack{{&self, 0}};
    visited.insert(&self);
    static const std::vector<LockCtx*> kNone;
    auto succ = [&](LockCtx* v) -> const std::vector<LockCtx*>& {
      auto it = edges.find(v);
      return it == edges.end() ? kNone : it->second;
    };
    while (!stack.empty()) {
      auto& [v, i] = stack.back();
      const auto& s = succ(v);
      if (i == s.size()) {
        stack.pop_back();
        continue;
      }
      LockCtx* u = s[i++];
      if (u == &self) {
        for (auto& f : stack) cycle.push_back(f.first);
        break;
      }
      if (visited.insert(u).second) stack.emplace_back(u, 0);
    }
    if (cycle.empty()) return;
    LockCtx* victim = *std::max_element(cycle.begin(), cycle.end(),
                                        [](LockCtx* a, LockCtx* b) { return a->ts < b->ts; });
    victim->victim.store(true);
    int vs = victim->waiting_shard.load();
    if (vs >= 0) {
      LockShard& sh = shards_[static_cast<size_t>(vs)];
      std::lock_guard lk(sh.mu);
      sh.cv.notify_all();
    }
  }

  std::chrono::microseconds delay_;
  std::atomic<uint64_t>& waits_;
  std::atomic<uint64_t>& deadlocks_;
  std::array<LockShard, kShards> shards_;
  std::mutex detect_mu_;
  std::mutex active_mu_;
  std::unordered_set<LockCtx*> active_;
};

class TwoPhaseLocking;

class TplTxn final : public BaselineTxn {
 public:
  TplTxn(TwoPhaseLocking& eng, Timestamp ts);
  ~TplTxn() override;

  std::optional<Record> read(const Key& key) override;
  void write(const Key& key, Record record) override;
  void insert(const Key& key, Record record) override { write(key, std::move(record)); }
  void erase(const Key& key) override;
  AbortCause commit() override;
  void abort() override;

 private:
  TwoPhaseLocking& eng_;
  LockCtx ctx_;
  bool done_ = false;
};

class TwoPhaseLocking final : public BaselineEngine {
 public:
  TwoPhaseLocking(const ProcedureRegistry& r, Storage& s, BaselineOptions o)
      : BaselineEngine(r, s, o), locks_(o.deadlock_delay, lock_waits_, deadlock_) {}
  Protocol protocol() const noexcept override { return Protocol::kTwoPhaseLocking; }
  std::unique_ptr<BaselineTxn> begin(Timestamp ts) override {
    return std::make_unique<TplTxn>(*this, ts == 0 ? next_ts() : ts);
  }

 private:
  friend class TplTxn;
  LockTable locks_;
};

TplTxn::TplTxn(TwoPhaseLocking& eng, Timestamp ts) : BaselineTxn(ts), eng_(eng) {
  ctx_.ts = ts;
  eng_.locks_.enlist(&ctx_);
}

TplTxn::~TplTxn() {
  if (!done_) abort();
  eng_.locks_.delist(&ctx_);
}

std::optional<Record> TplTxn::read(const Key& key) {
  auto w = writes_.find(key);
  if (w != writes_.end()) return w->second;
  eng_.locks_.acquire(ctx_, key, LockMode::kShared);
  auto r = eng_.storage_.get(key);
  if (eng_.options_.trace) events_.push_back({eng_.trace_seq(), ts_, piece_, key, TraceOp::kRead});
  return r;
}

void TplTxn::write(const Key& key, Record record) {
  eng_.locks_.acquire(ctx_, key, LockMode::kExclusive);
  writes_[key] = std::move(record);
}

void TplTxn::erase(const Key& key) {
  eng_.locks_.acquire(ctx_, key, LockMode::kExclusive);
  writes_[key] = std::nullopt;
}

AbortCause TplTxn::commit() {
  // Exclusive locks are still held, so installs are invisible until release.
  for (auto& [key, value] : writes_) {
    if (value) {
      eng_.storage_.put(key, std::move(*value));
    } else if (eng_.storage_.contains(key)) {
      eng_.storage_.erase(key);
    }
    if (eng_.options_.trace) events_.push_back({eng_.trace_seq(), ts_, piece_, key, TraceOp::kWrite});
  }
  commit_seq_ = eng_.next_commit_seq();
  eng_.locks_.release_all(ctx_);
  done_ = true;
  eng_.publish(*this);
  return AbortCause::kNone;
}

void TplTxn::abort() {
  writes_.clear();
  events_.clear();
  eng_.locks_.release_all(ctx_);
  done_ = true;
}

// ---- optimistic concurrency control ----

class Occ;

class OccTxn final : public BaselineTxn {
 public:
  OccTxn(Occ& eng, Timestamp ts) : BaselineTxn(ts), eng_(eng) {}
  std::optional<Record> read(const Key& key) override;
  void write(const Key& key, Record record) override { writes_[key] = std::move(record); }
  void insert(const Key& key, Record record) override { write(key, std::move(record)); }
  void erase(const Key& key) override { writes_[key] = std::nullopt; }
  AbortCause commit() override;
  void abort() override {
    writes_.clear();
    events_.clear();
  }

 private:
  Occ& eng_;
  std::unordered_map<Key, uint64_t, KeyHash> reads_;
  bool doomed_ = false;
};

class Occ final : public BaselineEngine {
 public:
  Occ(const ProcedureRegistry& r, Storage& s, BaselineOptions o) : BaselineEngine(r, s, o) {
    if (s.mode() != StorageMode::kSingleVersion) {
      fail(ErrorCode::kUsage, "occ needs single-version storage");
    }
  }
  Protocol protocol() const noexcept override { return Protocol::kOcc; }
  std::unique_ptr<BaselineTxn> begin(Timestamp ts) override {
    return std::make_unique<OccTxn>(*this, ts == 0 ? next_ts() : ts);
  }

 private:
  friend class OccTxn;
  std::mutex validation_mu_;
};

std::optional<Record> OccTxn::read(const Key& key) {
  auto w = writes_.find(key);
  if (w != writes_.end()) return w->second;
  Storage::Stamped st = eng_.storage_.read_stamped(key);
  auto [it, fresh] = reads_.emplace(key, st.stamp);
  if (!fresh && it->second != st.stamp) doomed_ = true;
  if (eng_.options_.trace) events_.push_back({eng_.trace_seq(), ts_, piece_, key, TraceOp::kRead});
  return st.record;
}

AbortCause OccTxn::commit() {
  std::lock_guard lk(eng_.validation_mu_);
  bool valid = !doomed_;
  for (const auto& [key, stamp] : reads_) {
    if (!valid) break;
    valid = eng_.storage_.stamp_of(key) == stamp;
  }
  if (!valid) {
    abort();
    ++eng_.validation_;
    return AbortCause::kValidation;
  }
  for (auto& [key, value] : writes_) {
    eng_.storage_.write_stamped(key, std::move(value));
    if (eng_.options_.trace) events_.push_back({eng_.trace_seq(), ts_, piece_, key, TraceOp::kWrite});
  }
  commit_seq_ = eng_.next_commit_seq();
  eng_.publish(*this);
  return AbortCause::kNone;
}

// ---- multi-version concurrency control (snapshot isolation) ----

class Mvcc;

class MvccTxn final : public BaselineTxn {
 public:
  MvccTxn(Mvcc& eng, Timestamp ts);
  ~MvccTxn() override;
  std::optional<Record> read(const Key& key) override;
  void write(const Key& key, Record record) override { writes_[key] = std::move(record); }
  void insert(const Key& key, Record record) override { write(key, std::move(record)); }
  void erase(const Key& key) override { writes_[key] = std::nullopt; }
  AbortCause commit() override;
  void abort() override;
  uint64_t snapshot() const noexcept { return snapshot_; }

 private:
  void finish();

  Mvcc& eng_;
  uint64_t snapshot_ = 0;
  uint64_t begin_seq_ = 0;
  bool done_ = false;
};

class Mvcc final : public BaselineEngine {
 public:
  Mvcc(const ProcedureRegistry& r, Storage& s, BaselineOptions o) : BaselineEngine(r, s, o) {
    if (s.mode() != StorageMode::kMultiVersion) {
      fail(ErrorCode::kUsage, "mvcc needs multi-version storage");
    }
    last_commit_.store(clock_->last());
  }
  Protocol protocol() const noexcept override { return Protocol::kMvcc; }
  std::unique_ptr<BaselineTxn> begin(Timestamp ts) override {
    return std::make_unique<MvccTxn>(*this, ts == 0 ? next_ts() : ts);
  }

 private:
  friend class MvccTxn;

  void enroll(uint64_t snapshot) {
    std::lock_guard lk(active_mu_);
    active_.insert(snapshot);
  }
  void leave(uint64_t snapshot) {
    std::lock_guard lk(active_mu_);
    active_.erase(active_.find(snapshot));
  }
  void maybe_gc() {
    if (options_.gc_interval == 0) return;
    if (commits_.fetch_add(1) % options_.gc_interval != options_.gc_interval - 1) return;
    uint64_t watermark;
    {
      std::lock_guard lk(active_mu_);
      watermark = active_.empty() ? last_commit_.load() : *active_.begin();
    }
    storage_.mv_gc(watermark);
    ++gc_passes_;
  }

  std::mutex commit_mu_;
  std::atomic<uint64_t> last_commit_{0};
  std::atomic<uint64_t> commits_{0};
  std::mutex active_mu_;
  std::multiset<uint64_t> active_;
};

MvccTxn::MvccTxn(Mvcc& eng, Timestamp ts) : BaselineTxn(ts), eng_(eng) {
  if (eng_.options_.trace) {
    // Snapshot and its trace position are taken together with respect to commits.
    std::lock_guard lk(eng_.commit_mu_);
    snapshot_ = eng_.last_commit_.load();
    begin_seq_ = eng_.trace_seq();
    eng_.enroll(snapshot_);
  } else {
    std::lock_guard lk(eng_.active_mu_);
    snapshot_ = eng_.last_commit_.load();
    eng_.active_.insert(snapshot_);
  }
}

MvccTxn::~MvccTxn() {
  if (!done_) abort();
}

void MvccTxn::finish() {
  if (done_) return;
  done_ = true;
  eng_.leave(snapshot_);
}

std::optional<Record> MvccTxn::read(const Key& key) {
  auto w = writes_.find(key);
  if (w != writes_.end()) return w->second;
  auto r = eng_.storage_.mv_read(key, snapshot_);
  if (eng_.options_.trace) events_.push_back({begin_seq_, ts_, piece_, key, TraceOp::kRead});
  return r;
}

AbortCause MvccTxn::commit() {
  {
    std::lock_guard lk(eng_.commit_mu_);
    for (const auto& [key, value] : writes_) {
      if (eng_.storage_.mv_latest_committed_ts(key) > snapshot_) {
        writes_.clear();
        events_.clear();
        ++eng_.write_conflict_;
        finish();
        return AbortCause::kWriteConflict;
      }
    }
    if (!writes_.empty()) {
      uint64_t cts = eng_.clock_->next();
      for (auto& [key, value] : writes_) {
        eng_.storage_.mv_install(key, cts, std::move(value), true);
        if (eng_.options_.trace) events_.push_back({eng_.trace_seq(), ts_, piece_, key, TraceOp::kWrite});
      }
      eng_.last_commit_.store(cts);
    }
    commit_seq_ = eng_.next_commit_seq();
  }
  finish();
  eng_.publish(*this);
  eng_.maybe_gc();
  return AbortCause::kNone;
}

void MvccTxn::abort() {
  writes_.clear();
  events_.clear();
  finish();
}

}  // namespace

std::unique_ptr<BaselineEngine> make_baseline(Protocol protocol, const ProcedureRegistry& registry,
                                              Storage& storage, BaselineOptions options) {
  switch (protocol) {
    case Protocol::kTwoPhaseLocking:
      return std::make_unique<TwoPhaseLocking>(registry, storage, options);
    case Protocol::kOcc: return std::make_unique<Occ>(registry, storage, options);
    case Protocol::kMvcc: return std::make_unique<Mvcc>(registry, storage, options);
    case Protocol::kDgcc: break;
  }
  fail(ErrorCode::kUsage, "dgcc is not a baseline protocol");
}

}  // namespace dgcc
