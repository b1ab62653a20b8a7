#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dgcc/baselines.hpp"
#include "dgcc/workloads.hpp"

namespace dgcc {

// One benchmark run. Workload-specific fields are optional so that a
// field set for the other workload can be rejected.
struct RunConfig {
  Protocol protocol = Protocol::kDgcc;
  WorkloadKind workload = WorkloadKind::kYcsb;
  uint32_t threads = 8;        // kappa
  uint32_t max_batch = 1000;   // delta
  uint32_t constructors = 1;   // DGCC graph builders

  std::optional<double> theta;            // YCSB, default 0.8
  std::optional<double> rw_ratio;         // YCSB, default 1
  std::optional<uint32_t> ops_per_txn;    // YCSB, default 16
  std::optional<uint64_t> table_size;     // YCSB, default 100000
  std::optional<uint32_t> warehouses;     // TPC-C, default 1
  std::optional<std::string> mix;         // TPC-C, "45,43,4,4,4"
  std::optional<uint32_t> items;          // TPC-C, default 100000

  // Count mode when txns > 0, otherwise a timed region of duration_s.
  double duration_s = 10.0;
  uint64_t txns = 0;
  // Excluded from every metric. warmup_s applies to timed runs,
  // warmup_txns to counted runs.
  double warmup_s = 0.5;
  uint64_t warmup_txns = 0;
  uint64_t seed = 1;
  // Arrivals per second; 0 generates as fast as transactions are consumed.
  double arrival_rate = 0.0;

  std::optional<std::filesystem::path> log_dir;  // DGCC only
  uint64_t checkpoint_interval = 0;
  uint32_t sections = 4;
  bool audit = false;

  // Throws Error(kUsage) for out-of-range values and invalid combinations.
  void validate() const;
  YcsbConfig ycsb() const;
  TpccConfig tpcc() const;
  bool timed() const noexcept { return txns == 0; }
};

struct LatencySummary {
  double mean_us = 0, p50_us = 0, p95_us = 0, p99_us = 0, max_us = 0;
};

// Nearest-rank percentiles over latencies in nanoseconds; sorts the input.
LatencySummary summarize_latency(std::vector<uint64_t>& latencies_ns);

struct AbortCounts {
  // Conflict aborts are retried and so are not final.
  uint64_t deadlock = 0;
  uint64_t validation = 0;
  uint64_t write_conflict = 0;
  uint64_t condition_check = 0;
};

struct AuditSummary {
  uint64_t events = 0;
  bool serializable = true;
  bool write_skew = false;
  std::string detail;
};

struct EngineReport {
  RunConfig config;
  std::string arrival_mode;  // "saturation" or "open_loop"

  // Measured region only.
  double measured_s = 0;
  uint64_t submitted = 0;
  uint64_t committed = 0;
  uint64_t final_aborts = 0;
  double throughput = 0;  // committed per second
  LatencySummary latency;
  AbortCounts aborts;

  // Engine counters over the whole run, warm-up included.
  std::map<size_t, uint64_t> rounds_histogram;
  uint64_t graphs = 0;
  double mean_batch_size = 0;
  uint64_t log_flushes = 0;
  uint64_t log_bytes = 0;
  uint64_t run_transactions = 0;
  uint64_t checkpoints = 0;

  std::optional<AuditSummary> audit;
  // Set by sweep().
  std::optional<std::string> sweep_axis;
  std::optional<double> sweep_value;

  bool accounting_closed() const noexcept { return submitted == committed + final_aborts; }
};

// Populates, warms up, runs the measured region, then quiesces. Throws
// Error(kUsage) for invalid configs and Error(kDurability) for log failures.
EngineReport run_benchmark(const RunConfig& cfg);

enum class SweepAxis { kThreads, kTheta, kRwRatio, kBatchSize };
const char* sweep_axis_name(SweepAxis a) noexcept;
// Accepts threads, theta, rw_ratio, batch_size.
std::optional<SweepAxis> parse_sweep_axis(const std::string& name) noexcept;
// Applies one axis value to a copy of cfg.
RunConfig with_axis(const RunConfig& cfg, SweepAxis axis, double value);

// One run per (protocol, value), protocols outermost.
std::vector<EngineReport> sweep(const RunConfig& base, SweepAxis axis, std::span<const double> values,
                                std::span<const Protocol> protocols);

enum class ReportFormat { kJson, kCsv };
std::optional<ReportFormat> parse_report_format(const std::string& name) noexcept;

// {"schema": "dgcc-bench/1", "runs": [...]}
std::string reports_to_json(std::span<const EngineReport> reports);
// Header plus one row per report.
std::string reports_to_csv(std::span<const EngineReport> reports);
std::string format_reports(std::span<const EngineReport> reports, ReportFormat format);

}  // namespace dgcc
