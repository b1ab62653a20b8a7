#include "dgcc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "dgcc/engine.hpp"
#include "dgcc/error.hpp"
#include "dgcc/verify.hpp"
#include "json.hpp"

namespace dgcc {

namespace {

void usage(const std::string& msg) { fail(ErrorCode::kUsage, msg); }

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0; }

}  // namespace

void RunConfig::validate() const {
  if (threads == 0 || threads > 1024) usage("threads must be in [1, 1024]");
  if (max_batch == 0) usage("max batch size must be positive");
  if (constructors == 0 || constructors > 64) usage("constructors must be in [1, 64]");
  if (!finite_nonneg(duration_s)) usage("duration must be a non-negative number of seconds");
  if (!finite_nonneg(warmup_s)) usage("warm-up must be a non-negative number of seconds");
  if (!finite_nonneg(arrival_rate)) usage("arrival rate must be non-negative");
  if (sections == 0) usage("sections must be positive");
  if (protocol != Protocol::kDgcc && log_dir) usage("logging is only available for dgcc");
  if (protocol != Protocol::kDgcc && checkpoint_interval != 0) {
    usage("checkpoints are only available for dgcc");
  }
  if (checkpoint_interval != 0 && !log_dir) usage("checkpoint interval needs a log directory");
  if (workload == WorkloadKind::kYcsb) {
    if (warehouses || mix || items) usage("warehouses, mix and items apply to tpcc only");
    ycsb().validate();
  } else {
    if (theta || rw_ratio || ops_per_txn || table_size) {
      usage("theta, rw-ratio, ops-per-txn and table-size apply to ycsb only");
    }
    tpcc().validate();
  }
}

YcsbConfig RunConfig::ycsb() const {
  YcsbConfig c;
  if (theta) c.theta = *theta;
  if (rw_ratio) c.rw_ratio = *rw_ratio;
  if (ops_per_txn) c.ops_per_txn = *ops_per_txn;
  if (table_size) c.table_size = *table_size;
  c.seed = seed;
  return c;
}

TpccConfig RunConfig::tpcc() const {
  TpccConfig c;
  if (warehouses) c.warehouses = *warehouses;
  if (mix) c.mix = parse_tpcc_mix(*mix);
  if (items) c.items = *items;
  c.seed = seed;
  return c;
}

LatencySummary summarize_latency(std::vector<uint64_t>& ns) {
  LatencySummary s;
  if (ns.empty()) return s;
  std::sort(ns.begin(), ns.end());
  auto rank = [&](double q) {
    size_t r = static_cast<size_t>(std::ceil(q * static_cast<double>(ns.size())));
    return static_cast<double>(ns[std::clamp<size_t>(r, 1, ns.size()) - 1]) / 1000.0;
  };
  long double sum = std::accumulate(ns.begin(), ns.end(), 0.0L);
  s.mean_us = static_cast<double>(sum / ns.size()) / 1000.0;
  s.p50_us = rank(0.50);
  s.p95_us = rank(0.95);
  s.p99_us = rank(0.99);
  s.max_us = static_cast<double>(ns.back()) / 1000.0;
  return s;
}

namespace {

std::unique_ptr<Workload> make_workload(const RunConfig& cfg) {
  if (cfg.workload == WorkloadKind::kYcsb) return std::make_unique<YcsbWorkload>(cfg.ycsb());
  return std::make_unique<TpccWorkload>(cfg.tpcc());
}

// Measured-region bookkeeping shared by the generator and the completers.
class Meter {
 public:
  void start(Clock::time_point t) {
    std::lock_guard lk(mu_);
    start_ = t;
    started_ = true;
  }
  bool started() const {
    std::lock_guard lk(mu_);
    return started_;
  }
  void submitted() { submitted_.fetch_add(1, std::memory_order_relaxed); }

  void complete(Clock::time_point arrival, Clock::time_point done, bool committed) {
    std::lock_guard lk(mu_);
    if (!started_ || arrival < start_) return;
    if (committed) {
      ++committed_;
      latencies_.push_back(
          static_cast<uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(done - arrival).count()));
    } else {
      ++aborted_;
    }
    last_ = std::max(last_, done);
  }

  void fill(EngineReport& r) {
    std::lock_guard lk(mu_);
    r.submitted = submitted_.load();
    r.committed = committed_;
    r.final_aborts = aborted_;
    r.measured_s = started_ && r.submitted > 0 ? std::chrono::duration<double>(last_ - start_).count() : 0;
    r.throughput = r.measured_s > 0 ? static_cast<double>(r.committed) / r.measured_s : 0;
    r.latency = summarize_latency(latencies_);
  }

 private:
  mutable std::mutex mu_;
  Clock::time_point start_{}, last_{};
  bool started_ = false;
  std::atomic<uint64_t> submitted_{0};
  uint64_t committed_ = 0, aborted_ = 0;
  std::vector<uint64_t> latencies_;
};

// Produces the transaction stream: warm-up first, then the measured
// region, paced when an arrival rate is set. `push` may block.
template <typename Push>
void generate(const RunConfig& cfg, Workload& wl, Meter& meter, const std::atomic<bool>& abort_flag,
              Push&& push) {
  Clock::time_point begin = Clock::now();
  uint64_t issued = 0;
  auto pace = [&] {
    if (cfg.arrival_rate <= 0) return;
    auto due = begin + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(static_cast<double>(issued) / cfg.arrival_rate));
    std::this_thread::sleep_until(due);
  };
  auto emit = [&](bool measured) {
    pace();
    Transaction t = wl.next();
    t.arrival_time = Clock::now();
    if (measured) meter.submitted();
    push(std::move(t));
    ++issued;
  };
  if (cfg.timed()) {
    auto warm_end = begin + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.warmup_s));
    while (!abort_flag && Clock::now() < warm_end) emit(false);
    Clock::time_point start = Clock::now();
    meter.start(start);
    auto end = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(cfg.duration_s));
    while (!abort_flag && Clock::now() < end) emit(true);
  } else {
    for (uint64_t i = 0; i < cfg.warmup_txns && !abort_flag; ++i) emit(false);
    meter.start(Clock::now());
    for (uint64_t i = 0; i < cfg.txns && !abort_flag; ++i) emit(true);
  }
}

void fill_audit(EngineReport& r, const TraceRecorder& trace) {
  auto events = trace.sorted();
  ScheduleVerdict v = schedule_check(events);
  AuditSummary a;
  a.events = events.size();
  a.serializable = v.serializable;
  a.write_skew = v.write_skew;
  a.detail = describe(v);
  r.audit = a;
}

void run_dgcc(const RunConfig& cfg, Workload& wl, EngineReport& report) {
  Storage storage;
  wl.populate(storage);
  TraceRecorder trace;
  EngineOptions opt;
  opt.batch.worker_count = cfg.threads;
  opt.batch.max_batch_size = cfg.max_batch;
  opt.batch.constructor_count = cfg.constructors;
  opt.batch.audit = cfg.audit;
  opt.log_dir = cfg.log_dir;
  opt.checkpoint_interval = cfg.checkpoint_interval;
  opt.sections = cfg.sections;
  if (cfg.audit) opt.trace = &trace;
  DgccEngine engine(wl.registry(), storage, opt);

  Meter meter;
  std::atomic<bool> generated{false}, stop{false};
  std::exception_ptr gen_error;
  std::thread gen([&] {
    try {
      generate(cfg, wl, meter, stop, [&](Transaction t) { engine.submit(std::move(t)); });
    } catch (...) {
      gen_error = std::current_exception();
    }
    generated = true;
  });
  auto on_commit = [&](uint64_t, std::span<const CommitNotice> notices) {
    Clock::time_point now = Clock::now();
    for (const auto& n : notices) meter.complete(n.arrival_time, now, n.outcome == Outcome::kCommitted);
  };
  try {
    for (;;) {
      if (engine.step(on_commit) > 0) continue;
      if (generated && engine.pending() == 0) break;
      std::this_thread::yield();
    }
  } catch (...) {
    stop = true;
    for (size_t i = 0; i < engine.queue_count(); ++i) engine.queue(i).close();
    gen.join();
    throw;
  }
  gen.join();
  if (gen_error) std::rethrow_exception(gen_error);
  engine.wait_checkpoints();

  meter.fill(report);
  const EngineStats& st = engine.stats();
  report.aborts.condition_check = report.final_aborts;
  report.rounds_histogram = st.rounds_per_graph;
  report.graphs = st.graphs;
  report.mean_batch_size = st.mean_batch_size();
  report.log_flushes = st.flushes;
  report.log_bytes = st.log_bytes;
  report.run_transactions = st.transactions;
  report.checkpoints = st.checkpoints;
  if (st.conflict_aborts != 0) fail(ErrorCode::kScheduling, "dgcc reported a conflict abort");
  if (cfg.audit) fill_audit(report, trace);
}

void run_baseline(const RunConfig& cfg, Workload& wl, EngineReport& report) {
  Storage storage(cfg.protocol == Protocol::kMvcc ? StorageMode::kMultiVersion
                                                  : StorageMode::kSingleVersion);
  wl.populate(storage);
  TraceRecorder trace;
  BaselineOptions opt;
  if (cfg.audit) opt.trace = &trace;
  auto engine = make_baseline(cfg.protocol, wl.registry(), storage, opt);

  TxnQueue queue(1000 * static_cast<size_t>(cfg.threads));
  Meter meter;
  std::atomic<bool> generated{false}, stop{false};
  std::mutex err_mu;
  std::exception_ptr error;
  auto record_error = [&] {
    std::lock_guard lk(err_mu);
    if (!error) error = std::current_exception();
    stop = true;
    queue.close();
  };
  std::vector<std::thread> workers;
  for (uint32_t w = 0; w < cfg.threads; ++w) {
    workers.emplace_back([&] {
      try {
        uint32_t idle = 0;
        while (!stop) {
          auto got = queue.pop_batch(1);
          if (got.empty()) {
            if (generated && queue.size() == 0) break;
            if (++idle < 64) {
              std::this_thread::yield();
            } else {
              std::this_thread::sleep_for(std::chrono::microseconds(50));
            }
            continue;
          }
          idle = 0;
          TxnResult res = engine->run(got.front());
          meter.complete(got.front().arrival_time, Clock::now(), res.outcome == Outcome::kCommitted);
        }
      } catch (...) {
        record_error();
      }
    });
  }
  try {
    generate(cfg, wl, meter, stop, [&](Transaction t) { queue.push(std::move(t)); });
  } catch (...) {
    record_error();
  }
  generated = true;
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);

  meter.fill(report);
  BaselineStats st = engine->stats();
  report.aborts.deadlock = st.deadlock_aborts;
  report.aborts.validation = st.validation_aborts;
  report.aborts.write_conflict = st.write_conflict_aborts;
  report.aborts.condition_check = report.final_aborts;
  report.run_transactions = st.committed + st.condition_aborts;
  if (cfg.audit) fill_audit(report, trace);
}

}  // namespace

EngineReport run_benchmark(const RunConfig& cfg) {
  cfg.validate();
  EngineReport report;
  report.config = cfg;
  report.arrival_mode = cfg.arrival_rate > 0 ? "open_loop" : "saturation";
  if (cfg.timed() && cfg.duration_s == 0) return report;
  auto wl = make_workload(cfg);
  if (cfg.protocol == Protocol::kDgcc) {
    run_dgcc(cfg, *wl, report);
  } else {
    run_baseline(cfg, *wl, report);
  }
  return report;
}

const char* sweep_axis_name(SweepAxis a) noexcept {
  switch (a) {
    case SweepAxis::kThreads: return "threads";
    case SweepAxis::kTheta: return "theta";
    case SweepAxis::kRwRatio: return "rw_ratio";
    case SweepAxis::kBatchSize: return "batch_size";
  }
  return "?";
}

std::optional<SweepAxis> parse_sweep_axis(const std::string& name) noexcept {
  for (SweepAxis a : {SweepAxis::kThreads, SweepAxis::kTheta, SweepAxis::kRwRatio, SweepAxis::kBatchSize}) {
    if (name == sweep_axis_name(a)) return a;
  }
  return std::nullopt;
}

RunConfig with_axis(const RunConfig& cfg, SweepAxis axis, double value) {
  RunConfig c = cfg;
  auto whole = [&](const char* what) {
    if (!(value >= 1) || value != std::floor(value) || value > 1e9) {
      usage(std::string(what) + " values must be positive integers");
    }
    return static_cast<uint32_t>(value);
  };
  switch (axis) {
    case SweepAxis::kThreads: c.threads = whole("threads"); break;
    case SweepAxis::kBatchSize: c.max_batch = whole("batch size"); break;
    case SweepAxis::kTheta: c.theta = value; break;
    case SweepAxis::kRwRatio: c.rw_ratio = value; break;
  }
  return c;
}

std::vector<EngineReport> sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                                std::span<const Protocol> protocols) {
  std::vector<EngineReport> out;
  for (Protocol p : protocols) {
    for (double v : values) {
      RunConfig c = with_axis(base, axis, v);
      c.protocol = p;
      EngineReport r = run_benchmark(c);
      r.sweep_axis = sweep_axis_name(axis);
      r.sweep_value = v;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::optional<ReportFormat> parse_report_format(const std::string& name) noexcept {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  return std::nullopt;
}

namespace {

using nlohmann::ordered_json;

template <typename T>
ordered_json opt(const std::optional<T>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json config_json(const RunConfig& c) {
  ordered_json j;
  j["protocol"] = protocol_name(c.protocol);
  j["workload"] = c.workload == WorkloadKind::kYcsb ? "ycsb" : "tpcc";
  j["threads"] = c.threads;
  j["max_batch"] = c.max_batch;
  j["constructors"] = c.constructors;
  bool ycsb = c.workload == WorkloadKind::kYcsb;
  YcsbConfig y = c.ycsb();
  TpccConfig t = c.tpcc();
  j["theta"] = ycsb ? ordered_json(y.theta) : ordered_json(nullptr);
  j["rw_ratio"] = ycsb ? ordered_json(y.rw_ratio) : ordered_json(nullptr);
  j["ops_per_txn"] = ycsb ? ordered_json(y.ops_per_txn) : ordered_json(nullptr);
  j["table_size"] = ycsb ? ordered_json(y.table_size) : ordered_json(nullptr);
  j["warehouses"] = ycsb ? ordered_json(nullptr) : ordered_json(t.warehouses);
  j["mix"] = ycsb ? ordered_json(nullptr) : ordered_json(t.mix);
  j["duration_s"] = c.duration_s;
  j["txns"] = c.txns;
  j["warmup_s"] = c.timed() ? ordered_json(c.warmup_s) : ordered_json(nullptr);
  j["warmup_txns"] = c.timed() ? ordered_json(nullptr) : ordered_json(c.warmup_txns);
  j["seed"] = c.seed;
  j["arrival_rate"] = c.arrival_rate;
  j["log_dir"] = c.log_dir ? ordered_json(c.log_dir->string()) : ordered_json(nullptr);
  j["checkpoint_interval"] = c.checkpoint_interval;
  j["sections"] = c.sections;
  j["audit"] = c.audit;
  return j;
}

ordered_json report_json(const EngineReport& r) {
  ordered_json j;
  j["config"] = config_json(r.config);
  j["arrival_mode"] = r.arrival_mode;
  j["queue_depth_per_worker"] = 1000;
  j["measured_s"] = r.measured_s;
  j["submitted"] = r.submitted;
  j["committed"] = r.committed;
  j["final_aborts"] = r.final_aborts;
  j["throughput"] = r.throughput;
  j["latency_us"] = {{"mean", r.latency.mean_us},
                     {"p50", r.latency.p50_us},
                     {"p95", r.latency.p95_us},
                     {"p99", r.latency.p99_us},
                     {"max", r.latency.max_us}};
  j["aborts"] = {{"deadlock", r.aborts.deadlock},
                 {"validation", r.aborts.validation},
                 {"write_conflict", r.aborts.write_conflict},
                 {"condition_check", r.aborts.condition_check}};
  ordered_json hist = ordered_json::object();
  for (const auto& [rounds, graphs] : r.rounds_histogram) hist[std::to_string(rounds)] = graphs;
  j["rounds_histogram"] = hist;
  j["graphs"] = r.graphs;
  j["mean_batch_size"] = r.mean_batch_size;
  j["log"] = {{"flushes", r.log_flushes}, {"bytes", r.log_bytes}, {"checkpoints", r.checkpoints}};
  j["run_transactions"] = r.run_transactions;
  if (r.audit) {
    j["audit"] = {{"events", r.audit->events},
                  {"serializable", r.audit->serializable},
                  {"write_skew", r.audit->write_skew},
                  {"detail", r.audit->detail}};
  } else {
    j["audit"] = nullptr;
  }
  j["sweep_axis"] = opt(r.sweep_axis);
  j["sweep_value"] = opt(r.sweep_value);
  j["accounting_closed"] = r.accounting_closed();
  return j;
}

}  // namespace

std::string reports_to_json(std::span<const EngineReport> reports) {
  ordered_json j;
  j["schema"] = "dgcc-bench/1";
  j["runs"] = ordered_json::array();
  for (const auto& r : reports) j["runs"].push_back(report_json(r));
  return j.dump(2) + "\n";
}

std::string reports_to_csv(std::span<const EngineReport> reports) {
  std::ostringstream os;
  os << "protocol,workload,sweep_axis,sweep_value,threads,max_batch,theta,rw_ratio,warehouses,"
        "arrival_mode,measured_s,submitted,committed,final_aborts,throughput,latency_mean_us,"
        "latency_p50_us,latency_p95_us,latency_p99_us,aborts_deadlock,aborts_validation,"
        "aborts_write_conflict,aborts_condition_check,graphs,mean_batch_size,log_flushes,log_bytes\n";
  for (const auto& r : reports) {
    const RunConfig& c = r.config;
    bool ycsb = c.workload == WorkloadKind::kYcsb;
    os << protocol_name(c.protocol) << ',' << (ycsb ? "ycsb" : "tpcc") << ','
       << r.sweep_axis.value_or("") << ',';
    if (r.sweep_value) os << *r.sweep_value;
    os << ',' << c.threads << ',' << c.max_batch << ',';
    if (ycsb) os << c.ycsb().theta;
    os << ',';
    if (ycsb) os << c.ycsb().rw_ratio;
    os << ',';
    if (!ycsb) os << c.tpcc().warehouses;
    os << ',' << r.arrival_mode << ',' << r.measured_s << ',' << r.submitted << ',' << r.committed
       << ',' << r.final_aborts << ',' << r.throughput << ',' << r.latency.mean_us << ','
       << r.latency.p50_us << ',' << r.latency.p95_us << ',' << r.latency.p99_us << ','
       << r.aborts.deadlock << ',' << r.aborts.validation << ',' << r.aborts.write_conflict << ','
       << r.aborts.condition_check << ',' << r.graphs << ',' << r.mean_batch_size << ','
       << r.log_flushes << ',' << r.log_bytes << '\n';
  }
  return os.str();
}

std::string format_reports(std::span<const EngineReport> reports, ReportFormat format) {
  return format == ReportFormat::kJson ? reports_to_json(reports) : reports_to_csv(reports);
}

}  // namespace dgcc
