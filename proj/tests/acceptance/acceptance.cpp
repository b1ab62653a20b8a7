// Acceptance suite. `acceptance N...` runs the named criteria ("all" runs
// every one) and prints one line per criterion. Exit status: 0 when all
// pass, 77 when none fail but at least one was skipped, 1 otherwise.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <functional>
#include <future>
#include <iostream>
#include <map>
#include <optional>
#include <atomic>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "dgcc/baselines.hpp"
#include "dgcc/bench.hpp"
#include "dgcc/engine.hpp"
#include "dgcc/error.hpp"
#include "dgcc/recovery.hpp"
#include "dgcc/verify.hpp"
#include "dgcc/workloads.hpp"
#include "support.hpp"

using namespace dgcc;
using namespace dgcc::testing;
namespace fs = std::filesystem;
using namespace std::chrono_literals;

namespace {

// ---- tolerances and sizes ----

constexpr int kYcsbBatches = 1000;
constexpr int kTpccBatches = 200;
constexpr int kTpccChain = 20;
constexpr size_t kMaxBatch = 500;
constexpr uint64_t kMaxKeys = 1000;
constexpr size_t kWorkerCounts[] = {1, 4, 8};
constexpr int kGraphBatches = 500;
constexpr int kRoundDags = 200;
constexpr int kBaselineBatches = 500;
constexpr int kRecoveryTrials = 50;
constexpr unsigned kTrendCores = 6;
constexpr double kHighContentionSpeedup = 1.5;  // criterion 7
constexpr double kScalingSpeedup = 2.0;         // criterion 8, kappa 6 over kappa 1
constexpr double kComparableFactor = 2.0;       // criterion 8, 2PL within this of DGCC
constexpr double kTrendSeconds = 10.0;
constexpr int kTrendRepeats = 3;
constexpr double kBatchNoise = 0.10;            // criterion 9
constexpr double kBatchSeconds = 2.0;
constexpr uint32_t kBatchThreads = 8;
constexpr double kWriteRatioSeconds = 2.0;
constexpr int kWriteRatioRepeats = 3;

struct Verdict {
  enum Kind { kPass, kFail, kSkip } kind = kPass;
  std::string detail;
};

Verdict pass(std::string d) { return {Verdict::kPass, std::move(d)}; }
Verdict failed(std::string d) { return {Verdict::kFail, std::move(d)}; }
Verdict skip(std::string d) { return {Verdict::kSkip, std::move(d)}; }

std::string fmt(double v, int prec = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

unsigned cores() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- DGCC batch runner ----

struct BatchRun {
  std::string digest;
  std::vector<Outcome> outcomes;
  EngineStats stats;
};

// Runs one batch through the full engine pipeline; timestamps become 1..n.
BatchRun run_dgcc_batch(const ProcedureRegistry& r, Storage& s, const std::vector<Transaction>& batch,
                        size_t workers) {
  EngineOptions o;
  o.batch.worker_count = workers;
  o.batch.max_batch_size = std::max<size_t>(1, batch.size());
  DgccEngine eng(r, s, o);
  for (const auto& t : batch) eng.queue(0).push(t);
  BatchRun out;
  out.outcomes.assign(batch.size(), Outcome::kAborted);
  eng.drain([&](uint64_t, std::span<const CommitNotice> ns) {
    for (const auto& n : ns) out.outcomes.at(n.ts - 1) = n.outcome;
  });
  out.digest = s.snapshot_digest();
  out.stats = eng.stats();
  return out;
}

std::vector<Transaction> numbered(std::vector<Transaction> b) {
  for (size_t i = 0; i < b.size(); ++i) b[i].ts = i + 1;
  return b;
}

// ---- criteria 1 and 2 ----

struct EquivalenceTally {
  uint64_t batches = 0, runs = 0, mismatches = 0, txns = 0;
  uint64_t committed = 0, condition_aborts = 0, conflict_aborts = 0, unexplained_aborts = 0;
  std::string first_mismatch;
  double seconds = 0, ycsb_seconds = 0;
};

void compare(EquivalenceTally& t, const OracleResult& oracle, const BatchRun& run, const std::string& what) {
  ++t.runs;
  t.conflict_aborts += run.stats.conflict_aborts;
  t.condition_aborts += run.stats.condition_aborts;
  t.committed += run.stats.committed;
  bool same = oracle.digest == run.digest && oracle.outcomes == run.outcomes;
  if (!same) {
    ++t.mismatches;
    if (t.first_mismatch.empty()) t.first_mismatch = what;
  }
  // Every DGCC abort must be one the serial oracle also produced through its check.
  for (size_t i = 0; i < run.outcomes.size(); ++i) {
    if (run.outcomes[i] == Outcome::kAborted && oracle.outcomes[i] != Outcome::kAborted) {
      ++t.unexplained_aborts;
    }
  }
}

const EquivalenceTally& equivalence_runs() {
  static std::optional<EquivalenceTally> cached;
  if (cached) return *cached;
  EquivalenceTally t;
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  const double thetas[] = {0.0, 0.8};
  const double gammas[] = {4.0, 1.0, 0.25};
  for (int b = 0; b < kYcsbBatches; ++b) {
    YcsbConfig c;
    c.theta = thetas[b % 2];
    c.rw_ratio = gammas[(b / 2) % 3];
    c.table_size = uniform_int(rng, 100, kMaxKeys);
    c.ops_per_txn = static_cast<uint32_t>(uniform_int(rng, 1, 16));
    c.seed = rng();
    YcsbWorkload wl(c);
    Storage init;
    wl.populate(init);
    std::vector<Transaction> batch;
    size_t n = uniform_int(rng, 1, kMaxBatch);
    for (size_t i = 0; i < n; ++i) batch.push_back(wl.next());
    batch = numbered(std::move(batch));
    OracleResult oracle = serial_oracle(wl.registry(), batch, init);
    for (size_t k : kWorkerCounts) {
      Storage s = init.clone();
      compare(t, oracle, run_dgcc_batch(wl.registry(), s, batch, k),
              "ycsb batch " + std::to_string(b) + " kappa " + std::to_string(k));
    }
    ++t.batches;
    t.txns += batch.size();
  }
  t.ycsb_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  // Chains of batches: each starts from a fresh store and every later batch
  // runs on the state the previous one produced.
  std::optional<TpccWorkload> tw;
  Storage state;
  for (int b = 0; b < kTpccBatches; ++b) {
    if (b % kTpccChain == 0) {
      TpccConfig tc;
      tc.warehouses = 1;
      tc.items = 5000;
      tc.customers_per_district = 300;
      tc.seed = 77 + static_cast<uint64_t>(b);
      tw.emplace(tc);
      state = Storage();
      tw->populate(state);
    }
    std::vector<Transaction> batch;
    size_t n = uniform_int(rng, 1, kMaxBatch);
    for (size_t i = 0; i < n; ++i) batch.push_back(tw->next());
    batch = numbered(std::move(batch));
    OracleResult oracle = serial_oracle(tw->registry(), batch, state);
    std::optional<Storage> next;
    for (size_t k : kWorkerCounts) {
      Storage s = state.clone();
      compare(t, oracle, run_dgcc_batch(tw->registry(), s, batch, k),
              "tpcc batch " + std::to_string(b) + " kappa " + std::to_string(k));
      next.emplace(std::move(s));
    }
    state = std::move(*next);
    ++t.batches;
    t.txns += batch.size();
  }
  t.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  cached = t;
  return *cached;
}

Verdict criterion1() {
  const auto& t = equivalence_runs();
  std::string d = std::to_string(t.batches) + " batches, " + std::to_string(t.runs) + " runs, " +
                  std::to_string(t.txns) + " txns, " + std::to_string(t.mismatches) + " mismatches, " +
                  fmt(t.seconds, 1) + " s (ycsb " + fmt(t.ycsb_seconds, 1) + " s)";
  if (t.mismatches != 0) return failed(d + "; first: " + t.first_mismatch);
  if (t.seconds >= 300) return failed(d + "; over the 5 min budget");
  return pass(d);
}

Verdict criterion2() {
  const auto& t = equivalence_runs();
  std::string d = "conflict aborts " + std::to_string(t.conflict_aborts) + ", condition-check aborts " +
                  std::to_string(t.condition_aborts) + ", aborts without an oracle abort " +
                  std::to_string(t.unexplained_aborts);
  if (t.conflict_aborts != 0 || t.unexplained_aborts != 0) return failed(d);
  if (t.condition_aborts == 0) return failed(d + "; no condition-check abort was exercised");
  return pass(d);
}

// ---- criterion 3 ----

bool acyclic(const DependencyGraph& g) {
  std::vector<uint32_t> indeg(g.vertex_count());
  std::vector<VertexId> ready;
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    indeg[v] = g.in_degree(v);
    if (indeg[v] == 0) ready.push_back(v);
  }
  size_t seen = 0;
  while (!ready.empty()) {
    VertexId v = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& a : g.successors(v)) {
      if (--indeg[a.vertex] == 0) ready.push_back(a.vertex);
    }
  }
  return seen == g.vertex_count();
}

std::string walkthrough_check() {
  ProcedureRegistry r = script_registry();
  auto txns = three_txn_example(r);
  GraphBuilder b;
  for (auto& t : txns) b.add(std::move(t));
  const DependencyGraph& g = b.graph();
  VertexId t21 = *g.find(2, 0), t22 = *g.find(2, 1);
  VertexId t31 = *g.find(3, 0), t32 = *g.find(3, 1), t33 = *g.find(3, 2);
  std::set<std::pair<VertexId, VertexId>> into_t3;
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    for (const auto& a : g.successors(v)) {
      if (g.vertex(a.vertex).ts == 3) into_t3.insert({v, a.vertex});
    }
  }
  std::set<std::pair<VertexId, VertexId>> want{{t21, t31}, {t22, t31}, {t21, t32}};
  if (into_t3 != want) return "edges into T3 differ";
  for (auto [f, t] : want) {
    if (g.edge_kind(f, t) != EdgeKind::kTimeOrder) return "edge into T3 is not time-order";
  }
  if (g.in_degree(t33) != 0 || !g.successors(t33).empty()) return "T33 is not isolated";
  return "";
}

Verdict criterion3() {
  ProcedureRegistry r = script_registry();
  std::mt19937_64 rng(3);
  size_t pairs = 0, edges = 0;
  for (int b = 0; b < kGraphBatches; ++b) {
    auto batch = random_scripts(rng, 2 + rng() % 60, 3 + rng() % 40);
    std::vector<ChoppedTransaction> chopped_batch;
    for (const auto& t : batch) chopped_batch.push_back(chop(r, t));
    DependencyGraph g = build_graph(r, batch);
    edges += g.edge_count();
    if (!acyclic(g)) return failed("batch " + std::to_string(b) + " has a cycle");
    for (VertexId v = 0; v < g.vertex_count(); ++v) {
      for (const auto& a : g.successors(v)) {
        const Vertex& from = g.vertex(v);
        const Vertex& to = g.vertex(a.vertex);
        if (a.kind == EdgeKind::kTimeOrder && from.ts >= to.ts) {
          return failed("batch " + std::to_string(b) + " has a time-order edge against timestamps");
        }
        if (a.kind == EdgeKind::kLogic && from.ts != to.ts) {
          return failed("batch " + std::to_string(b) + " has a logic edge across transactions");
        }
      }
    }
    auto required = graph_edge_oracle(chopped_batch);
    pairs += required.size();
    if (!missing_paths(g, required).empty()) {
      return failed("batch " + std::to_string(b) + " misses a path for a conflicting pair");
    }
  }
  std::string fig = walkthrough_check();
  if (!fig.empty()) return failed("walkthrough example: " + fig);
  return pass(std::to_string(kGraphBatches) + " batches acyclic, " + std::to_string(pairs) +
              " conflicting pairs all reachable over " + std::to_string(edges) +
              " edges; walkthrough edges T21->T31, T22->T31, T21->T32 and isolated T33 reproduced");
}

// ---- criterion 4 ----

using Round = std::set<std::pair<Timestamp, uint32_t>>;

Verdict criterion4() {
  ProcedureRegistry r = script_registry();
  GraphBuilder b;
  for (auto& t : three_txn_example(r)) b.add(std::move(t));
  ExecutionState st(b.graph());
  std::vector<Round> rounds;
  while (!st.finished()) {
    Round rd;
    for (VertexId v : st.frontier()) rd.emplace(b.graph().vertex(v).ts, b.graph().vertex(v).piece);
    rounds.push_back(rd);
    st.advance();
  }
  // Pieces are zero-based here: (1, 0) is T11.
  std::vector<Round> want{{{1, 0}, {2, 1}, {3, 2}}, {{1, 1}, {1, 2}}, {{2, 0}}, {{3, 0}, {3, 1}}};
  if (rounds != want) return failed("example schedule frontiers differ");

  std::mt19937_64 rng(4);
  WorkerPool pool(2);
  BatchConfig cfg;
  cfg.worker_count = 2;
  size_t total_rounds = 0;
  for (int i = 0; i < kRoundDags; ++i) {
    auto batch = random_scripts(rng, 5 + rng() % 30, 3 + rng() % 15);
    DependencyGraph g = build_graph(r, batch);
    Storage s;
    add_script_table(s);
    GraphExecutor ex(pool, cfg);
    GraphResult res = ex.execute(g, s);
    if (res.stats.rounds != longest_path_vertices(g)) {
      return failed("dag " + std::to_string(i) + ": rounds " + std::to_string(res.stats.rounds) +
                    " vs longest path " + std::to_string(longest_path_vertices(g)));
    }
    total_rounds += res.stats.rounds;
  }
  return pass("example frontiers {T11,T22,T33} {T12,T13} {T21} {T31,T32}; " + std::to_string(kRoundDags) +
              " random DAGs match longest path (" + std::to_string(total_rounds) + " rounds)");
}

// ---- criterion 5 ----

class YieldingAccess final : public DataAccess {
 public:
  explicit YieldingAccess(DataAccess& inner) : inner_(inner) {}
  std::optional<Record> read(const Key& k) override {
    std::this_thread::yield();
    return inner_.read(k);
  }
  void write(const Key& k, Record v) override {
    std::this_thread::yield();
    inner_.write(k, std::move(v));
  }
  void insert(const Key& k, Record v) override {
    std::this_thread::yield();
    inner_.insert(k, std::move(v));
  }
  void erase(const Key& k) override {
    std::this_thread::yield();
    inner_.erase(k);
  }

 private:
  DataAccess& inner_;
};

// Yields around each access so that transactions interleave even on one core.
ProcedureRegistry yielding_registry() {
  StoredProcedure proc = script_procedure();
  for (auto& t : proc.templates) {
    t.body = [inner = t.body](PieceContext& ctx) {
      YieldingAccess y(ctx.data);
      PieceContext c{y, ctx.params, ctx.ts, ctx.instance};
      return inner(c);
    };
  }
  ProcedureRegistry r;
  r.add(std::move(proc));
  return r;
}

Storage seeded(StorageMode mode, uint64_t keys) {
  Storage s(mode);
  add_script_table(s);
  for (uint64_t i = 0; i < keys; ++i) s.put(key(i), counter_record(static_cast<int64_t>(i)));
  return s;
}

std::string crossed_locks_scenario() {
  ProcedureRegistry r = script_registry();
  Storage s = seeded(StorageMode::kSingleVersion, 2);
  BaselineOptions opt;
  opt.deadlock_delay = 1ms;
  auto eng = make_baseline(Protocol::kTwoPhaseLocking, r, s, opt);
  auto t1 = eng->begin(1);
  auto t2 = eng->begin(2);
  t1->write(key(0), counter_record(1));
  t2->write(key(1), counter_record(2));
  auto first = std::async(std::launch::async, [&] {
    t1->write(key(1), counter_record(1));
    return t1->commit();
  });
  std::this_thread::sleep_for(5ms);
  bool t2_victim = false;
  try {
    t2->write(key(0), counter_record(2));
    t2->commit();
  } catch (const TxnAborted& a) {
    t2_victim = a.cause == AbortCause::kDeadlock;
    t2->abort();
  }
  AbortCause c1 = first.get();
  uint64_t victims = eng->stats().deadlock_aborts;
  if (!t2_victim || c1 != AbortCause::kNone || victims != 1) {
    return "2PL crossed locks gave " + std::to_string(victims) + " deadlock aborts";
  }
  return "";
}

std::string overlapping_reads_scenario() {
  ProcedureRegistry r = script_registry();
  Storage s = seeded(StorageMode::kSingleVersion, 2);
  auto eng = make_baseline(Protocol::kOcc, r, s);
  auto t1 = eng->begin(1);
  auto t2 = eng->begin(2);
  t1->read(key(0));
  t2->read(key(0));
  t2->write(key(0), counter_record(5));
  AbortCause c2 = t2->commit();
  t1->write(key(1), counter_record(6));
  AbortCause c1 = t1->commit();
  uint64_t v = eng->stats().validation_aborts;
  if (c2 != AbortCause::kNone || c1 != AbortCause::kValidation || v != 1) {
    return "OCC overlap gave " + std::to_string(v) + " validation aborts";
  }
  return "";
}

Verdict criterion5() {
  if (auto e = crossed_locks_scenario(); !e.empty()) return failed(e);
  if (auto e = overlapping_reads_scenario(); !e.empty()) return failed(e);
  ProcedureRegistry r = yielding_registry();
  std::ostringstream summary;
  for (Protocol p : {Protocol::kTwoPhaseLocking, Protocol::kOcc, Protocol::kMvcc}) {
    std::mt19937_64 rng(500 + static_cast<int>(p));
    uint64_t conflicts = 0, skew = 0, txns = 0;
    for (int b = 0; b < kBaselineBatches; ++b) {
      Storage s = seeded(p == Protocol::kMvcc ? StorageMode::kMultiVersion : StorageMode::kSingleVersion, 6);
      TraceRecorder trace;
      BaselineOptions opt;
      opt.trace = &trace;
      opt.deadlock_delay = 100us;
      auto eng = make_baseline(p, r, s, opt);
      auto batch = random_scripts(rng, 12, 6);
      std::atomic<size_t> cursor{0};
      std::vector<std::thread> ws;
      for (int w = 0; w < 4; ++w) {
        ws.emplace_back([&] {
          for (size_t i; (i = cursor.fetch_add(1)) < batch.size();) eng->run(batch[i]);
        });
      }
      for (auto& w : ws) w.join();
      txns += batch.size();
      conflicts += eng->stats().conflict_aborts();
      auto events = trace.sorted();
      ScheduleVerdict v = schedule_check(events);
      if (v.serializable) continue;
      if (p == Protocol::kMvcc && v.write_skew) {
        ++skew;
        continue;
      }
      return failed(std::string(protocol_name(p)) + " batch " + std::to_string(b) + ": " + describe(v));
    }
    summary << protocol_name(p) << " " << txns << " txns/" << conflicts << " conflict aborts";
    if (p == Protocol::kMvcc) summary << "/" << skew << " flagged write-skew batches";
    summary << "; ";
  }
  return pass(summary.str() + "crossed-lock and overlap scenarios gave one deadlock and one validation abort");
}

// ---- criterion 6 ----

LogWriterOptions fast_log() {
  LogWriterOptions o;
  o.sync = false;
  return o;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("dgcc_acc_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Storage script_store(bool seed) {
  Storage s;
  add_script_table(s);
  if (seed) {
    for (uint64_t i = 0; i < 24; i += 2) s.put(key(i), counter_record(static_cast<int64_t>(i)));
  }
  return s;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

// Runs txns until the log write of graph `fail_at` fails. Returns the
// committed transactions per reported graph and each graph's end offset in
// the last segment.
struct KilledRun {
  std::vector<std::vector<Transaction>> graphs;
  std::vector<uintmax_t> ends;
  std::vector<std::string> digests;
  bool killed = false;
};

KilledRun run_until_failure(const ProcedureRegistry& r, Storage& live, EngineOptions o,
                            const std::vector<Transaction>& txns, uint64_t fail_at) {
  KilledRun run;
  o.log.fail_at_graph = fail_at;
  DgccEngine eng(r, live, o);
  for (auto t : txns) eng.submit(std::move(t));
  try {
    eng.drain([&](uint64_t, std::span<const CommitNotice> ns) {
      std::vector<Transaction> g;
      for (const auto& n : ns) {
        Transaction t = txns[n.ts - 1];
        t.ts = n.ts;
        g.push_back(t);
      }
      run.graphs.push_back(std::move(g));
      run.ends.push_back(fs::file_size(list_segments(*o.log_dir).back()));
      run.digests.push_back(live.snapshot_digest());
    });
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDurability) throw;
    run.killed = true;
  }
  eng.wait_checkpoints();
  return run;
}

// One trial: returns an empty string on success. Even trials crash between
// graphs; odd trials crash part-way through writing the next graph.
std::string recovery_trial(std::mt19937_64& rng, int trial) {
  ProcedureRegistry r = script_registry();
  TempDir d("rec" + std::to_string(trial));
  Storage init = script_store(true);
  EngineOptions o;
  o.batch.worker_count = 1 + rng() % 4;
  o.batch.max_batch_size = 5 + rng() % 20;
  o.log_dir = d.path / "log";
  o.checkpoint_dir = d.path / "ckpt";
  o.checkpoint_interval = rng() % 5;
  o.log = fast_log();
  bool torn = trial % 2 == 1;
  auto txns = random_scripts(rng, 150 + rng() % 100, 24);
  uint64_t graphs = txns.size() / o.batch.max_batch_size;
  uint64_t k = 1 + rng() % (graphs - 1);

  Storage live = init.clone();
  KilledRun run = run_until_failure(r, live, o, txns, k + 1);
  if (!run.killed) return "injected failure did not fire";
  if (run.graphs.size() != k) return "reported graphs differ from the kill point";
  uint64_t appended = 0;
  if (torn) {
    // A deterministic twin run supplies the bytes graph k + 1 would have had.
    EngineOptions t = o;
    t.log_dir = d.path / "twin_log";
    t.checkpoint_dir = d.path / "twin_ckpt";
    Storage twin_store = init.clone();
    KilledRun twin = run_until_failure(r, twin_store, t, txns, k + 2);
    if (twin.graphs.size() != k + 1) return "twin run diverged";
    fs::path seg = list_segments(d.path / "log").back();
    std::string mine = read_bytes(seg);
    std::string theirs = read_bytes(list_segments(d.path / "twin_log").back());
    if (theirs.size() != twin.ends.back() || theirs.compare(0, mine.size(), mine) != 0) {
      return "twin log is not a continuation";
    }
    uintmax_t len = twin.ends[k] - twin.ends[k - 1];
    appended = 1 + rng() % (len - 1);
    std::ofstream(seg, std::ios::binary | std::ios::app).write(theirs.data() + mine.size(),
                                                               static_cast<std::streamsize>(appended));
  }
  std::vector<Transaction> reported;
  for (const auto& g : run.graphs) reported.insert(reported.end(), g.begin(), g.end());

  Storage rec = script_store(false);
  RecoveryReport rep = recover(d.path / "log", d.path / "ckpt", r, rec);
  if (rec.snapshot_digest() != run.digests.back()) {
    return "recovered digest differs from the last committed graph (graphs " + std::to_string(k) +
           ", durable " + std::to_string(rep.last_graph_id) + ", checkpoint " +
           (rep.used_checkpoint ? std::to_string(rep.checkpoint_watermark) : "none") + ", replayed " +
           std::to_string(rep.graphs_replayed) + ")";
  }
  OracleResult oracle = serial_oracle(r, reported, init);
  if (oracle.digest != rec.snapshot_digest()) return "recovered state is not the reported transactions' state";
  if (rep.last_graph_id != k) return "durable graph count differs";
  if (rep.last_ts != reported.back().ts) return "an unreported transaction survived or a reported one was lost";
  if (rep.truncated_bytes != appended) return "torn tail not truncated exactly";
  Storage again = script_store(false);
  recover(d.path / "log", d.path / "ckpt", r, again);
  if (again.snapshot_digest() != rec.snapshot_digest()) return "replay is not idempotent";
  return "";
}

Verdict criterion6() {
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(6);
  for (int i = 0; i < kRecoveryTrials; ++i) {
    std::string e = recovery_trial(rng, i);
    if (!e.empty()) return failed("trial " + std::to_string(i) + ": " + e);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (secs >= 180) return failed("over the 3 min budget");
  return pass(std::to_string(kRecoveryTrials) + " trials (injected log failures and torn tails) in " +
              fmt(secs, 1) + " s");
}

// ---- trend checks ----

RunConfig trend_config(Protocol p, double theta, uint32_t threads, double seconds) {
  RunConfig c;
  c.protocol = p;
  c.theta = theta;
  c.rw_ratio = 1.0;
  c.threads = threads;
  c.max_batch = 1000;
  c.duration_s = seconds;
  c.warmup_s = 1.0;
  return c;
}

double median_throughput(const RunConfig& c, int repeats) {
  std::vector<double> xs;
  for (int i = 0; i < repeats; ++i) xs.push_back(run_benchmark(c).throughput);
  std::sort(xs.begin(), xs.end());
  return xs[xs.size() / 2];
}

Verdict criterion7() {
  if (cores() < kTrendCores) {
    return skip("needs at least " + std::to_string(kTrendCores) + " cores, found " + std::to_string(cores()));
  }
  double dgcc = median_throughput(trend_config(Protocol::kDgcc, 0.8, 8, kTrendSeconds), kTrendRepeats);
  std::ostringstream os;
  os << "dgcc " << fmt(dgcc, 0) << " txn/s";
  bool ok = true;
  for (Protocol p : {Protocol::kTwoPhaseLocking, Protocol::kOcc, Protocol::kMvcc}) {
    double x = median_throughput(trend_config(p, 0.8, 8, kTrendSeconds), kTrendRepeats);
    os << ", " << protocol_name(p) << " " << fmt(x, 0) << " (" << fmt(dgcc / x) << "x)";
    ok = ok && dgcc >= kHighContentionSpeedup * x;
  }
  return ok ? pass(os.str()) : failed(os.str());
}

Verdict criterion8() {
  if (cores() < kTrendCores) {
    return skip("needs at least " + std::to_string(kTrendCores) + " cores, found " + std::to_string(cores()));
  }
  double d1 = median_throughput(trend_config(Protocol::kDgcc, 0.5, 1, kTrendSeconds), kTrendRepeats);
  double d6 = median_throughput(trend_config(Protocol::kDgcc, 0.5, 6, kTrendSeconds), kTrendRepeats);
  double l6 = median_throughput(trend_config(Protocol::kTwoPhaseLocking, 0.5, 6, kTrendSeconds), kTrendRepeats);
  std::string d = "dgcc k=1 " + fmt(d1, 0) + ", k=6 " + fmt(d6, 0) + " (" + fmt(d6 / d1) + "x); 2pl k=6 " +
                  fmt(l6, 0);
  bool ok = d6 >= kScalingSpeedup * d1 && l6 * kComparableFactor >= d6 && d6 * kComparableFactor >= l6;
  return ok ? pass(d) : failed(d);
}

uint32_t desk_threads() { return std::clamp(cores(), 1u, 8u); }

Verdict criterion9() {
  const uint32_t deltas[] = {100, 300, 500, 800, 1000, 5000};
  std::vector<double> tput, lat;
  std::ostringstream os;
  for (uint32_t delta : deltas) {
    RunConfig c;
    c.protocol = Protocol::kDgcc;
    c.workload = WorkloadKind::kTpcc;
    c.items = 20000;
    // Queue depth is 1000 per worker, so fewer workers would cap every
    // batch below the largest delta.
    c.threads = kBatchThreads;
    c.max_batch = delta;
    c.duration_s = kBatchSeconds;
    c.warmup_s = 0.5;
    EngineReport r = run_benchmark(c);
    tput.push_back(r.throughput);
    lat.push_back(r.latency.mean_us);
    os << delta << ":" << fmt(r.throughput, 0) << "/" << fmt(r.latency.mean_us / 1000, 1) << "ms ";
  }
  size_t peak = static_cast<size_t>(std::max_element(tput.begin(), tput.end()) - tput.begin());
  bool rising = true;
  for (size_t i = 1; i <= peak; ++i) rising = rising && tput[i] >= (1 - kBatchNoise) * tput[i - 1];
  bool latency = lat[5] > lat[2];
  std::string d = "kappa " + std::to_string(kBatchThreads) + ", delta:txn/s/latency " + os.str() +
                  "; throughput peaks at delta " + std::to_string(deltas[peak]);
  if (!rising) return failed(d + "; throughput falls before its peak");
  if (!latency) return failed(d + "; latency at 5000 not above 500");
  return pass(d);
}

Verdict criterion10() {
  // One worker never conflicts, so the effect under test cannot appear.
  if (cores() < 2) return skip("needs at least 2 cores for concurrent workers, found 1");
  std::ostringstream os;
  std::map<Protocol, double> ratio;
  for (Protocol p : {Protocol::kDgcc, Protocol::kTwoPhaseLocking, Protocol::kOcc}) {
    double x[2];
    const double gammas[] = {4.0, 0.25};
    for (int i = 0; i < 2; ++i) {
      RunConfig c = trend_config(p, 0.8, desk_threads(), kWriteRatioSeconds);
      c.rw_ratio = gammas[i];
      c.warmup_s = 0.5;
      x[i] = median_throughput(c, kWriteRatioRepeats);
    }
    ratio[p] = x[0] / x[1];
    os << protocol_name(p) << " " << fmt(x[0], 0) << "->" << fmt(x[1], 0) << " (" << fmt(ratio[p]) << "x) ";
  }
  bool ok = ratio[Protocol::kDgcc] < ratio[Protocol::kTwoPhaseLocking] &&
            ratio[Protocol::kDgcc] < ratio[Protocol::kOcc];
  std::string d = "kappa " + std::to_string(desk_threads()) + ", gamma 4->0.25 degradation: " + os.str();
  return ok ? pass(d) : failed(d);
}

// ---- criterion 11 ----

// Bytes a redo log shipping full after-images would write for one
// transaction: per written key, the key plus each column with a 4-byte length.
uint64_t full_image_bytes(const std::vector<TraceEvent>& trace, const Storage& final_state) {
  std::set<std::pair<Timestamp, Key>> writes;
  for (const auto& e : trace) {
    if (e.op == TraceOp::kWrite) writes.insert({e.ts, e.key});
  }
  uint64_t bytes = 0;
  for (const auto& [ts, k] : writes) {
    bytes += 2 + k.primary.size();
    auto rec = final_state.get(k);
    if (!rec) continue;
    for (const auto& col : *rec) bytes += 4 + col.size();
  }
  return bytes;
}

Verdict criterion11() {
  std::ostringstream os;
  bool ok = true;
  for (WorkloadKind kind : {WorkloadKind::kYcsb, WorkloadKind::kTpcc}) {
    std::unique_ptr<Workload> wl;
    if (kind == WorkloadKind::kYcsb) {
      YcsbConfig c;
      c.table_size = 5000;
      c.seed = 11;
      wl = std::make_unique<YcsbWorkload>(c);
    } else {
      TpccConfig c;
      c.items = 5000;
      c.customers_per_district = 300;
      c.seed = 11;
      wl = std::make_unique<TpccWorkload>(c);
    }
    TempDir d(kind == WorkloadKind::kYcsb ? "log_ycsb" : "log_tpcc");
    Storage init;
    wl->populate(init);
    Storage live = init.clone();
    std::vector<Transaction> txns;
    for (int i = 0; i < 3000; ++i) txns.push_back(wl->next());
    txns = numbered(std::move(txns));
    EngineOptions o;
    o.batch.worker_count = 2;
    o.batch.max_batch_size = 250;
    o.log_dir = d.path / "log";
    o.log.sync = true;
    uint64_t committed = 0;
    {
      DgccEngine eng(wl->registry(), live, o);
      auto count = [&](uint64_t, std::span<const CommitNotice> ns) {
        for (const auto& n : ns) committed += n.outcome == Outcome::kCommitted;
      };
      // Bounded queue: feed it in chunks of its depth.
      for (size_t i = 0; i < txns.size(); ++i) {
        eng.queue(0).push(txns[i]);
        if (eng.queue(0).size() == eng.queue(0).depth()) eng.drain(count);
      }
      eng.drain(count);
      const EngineStats& st = eng.stats();
      double per_graph = static_cast<double>(st.flushes) / static_cast<double>(st.graphs);
      OracleResult oracle = serial_oracle(wl->registry(), txns, init, true);
      double logged = static_cast<double>(st.log_bytes) / static_cast<double>(st.transactions);
      if (oracle.digest != live.snapshot_digest()) return failed("logged run diverged from the oracle");
      double image = static_cast<double>(full_image_bytes(oracle.trace, live)) /
                     static_cast<double>(std::max<uint64_t>(1, committed));
      os << (kind == WorkloadKind::kYcsb ? "ycsb" : "tpcc") << ": " << st.graphs << " graphs, "
         << fmt(per_graph) << " flushes/graph, " << fmt(logged, 0) << " log B/txn vs " << fmt(image, 0)
         << " full-image B/txn; ";
      ok = ok && st.flushes == st.graphs && logged < image;
    }
  }
  return ok ? pass(os.str()) : failed(os.str());
}

const std::map<int, std::pair<const char*, std::function<Verdict()>>>& criteria() {
  static const std::map<int, std::pair<const char*, std::function<Verdict()>>> m{
      {1, {"serial equivalence", criterion1}},
      {2, {"zero conflict aborts", criterion2}},
      {3, {"graph correctness", criterion3}},
      {4, {"execution rounds", criterion4}},
      {5, {"baseline serializability", criterion5}},
      {6, {"recovery", criterion6}},
      {7, {"high-contention trend", criterion7}},
      {8, {"low-contention trend", criterion8}},
      {9, {"batch-size shape", criterion9}},
      {10, {"write-ratio resilience", criterion10}},
      {11, {"logging efficiency", criterion11}},
  };
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "all") {
      for (const auto& [n, c] : criteria()) which.push_back(n);
    } else {
      which.push_back(std::stoi(a));
    }
  }
  if (which.empty()) {
    std::cerr << "usage: acceptance all | N...\n";
    return 2;
  }
  bool any_fail = false, any_skip = false;
  for (int n : which) {
    auto it = criteria().find(n);
    if (it == criteria().end()) {
      std::cerr << "no criterion " << n << "\n";
      return 2;
    }
    Verdict v;
    try {
      v = it->second.second();
    } catch (const std::exception& e) {
      v = failed(std::string("exception: ") + e.what());
    }
    const char* tag = v.kind == Verdict::kPass ? "PASS" : v.kind == Verdict::kFail ? "FAIL" : "SKIP";
    std::cout << "criterion " << n << " (" << it->second.first << "): " << tag << " - " << v.detail
              << std::endl;
    any_fail = any_fail || v.kind == Verdict::kFail;
    any_skip = any_skip || v.kind == Verdict::kSkip;
  }
  if (any_fail) return 1;
  return any_skip ? 77 : 0;
}
