#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dgcc/executor.hpp"
#include "dgcc/graph.hpp"
#include "dgcc/trace.hpp"

namespace dgcc {

struct OracleResult {
  std::string digest;
  std::vector<Outcome> outcomes;  // batch order
  std::vector<TraceEvent> trace;  // committed transactions only
};

// Runs each transaction to completion, one at a time in timestamp order, on
// a clone of `initial`. A failed condition check aborts the transaction
// before any of its other pieces run.
OracleResult serial_oracle(const ProcedureRegistry& registry, std::span<const Transaction> batch,
                           const Storage& initial, bool record_trace = false);

enum class ConflictKind : uint8_t { kWriteWrite, kWriteRead, kReadWrite };

const char* conflict_kind_name(ConflictKind kind) noexcept;

struct ConflictEdge {
  Timestamp from = 0;
  Timestamp to = 0;
  ConflictKind kind = ConflictKind::kWriteWrite;
  Key key;
};

struct ScheduleVerdict {
  bool serializable = true;
  // Edges of one cycle when not serializable, in cycle order.
  std::vector<ConflictEdge> witness;
  // Set when the witness has two consecutive read-write anti-dependencies
  // and the graph without anti-dependencies is acyclic: the write-skew shape
  // permitted by snapshot isolation.
  bool write_skew = false;
  size_t transactions = 0;
  size_t edges = 0;
};

// Conflict graph over transactions, built from events ordered by seq, then
// cycle detection.
ScheduleVerdict schedule_check(std::span<const TraceEvent> trace);

std::string describe(const ScheduleVerdict& verdict);

// One cross-transaction conflicting piece pair, earlier timestamp first.
struct PiecePair {
  Timestamp from_ts = 0;
  uint32_t from_piece = 0;
  Timestamp to_ts = 0;
  uint32_t to_piece = 0;
};

// Brute-force enumeration of every pair of pieces of distinct transactions
// where one writes a key the other accesses.
std::vector<PiecePair> graph_edge_oracle(std::span<const ChoppedTransaction> batch);

// Transitive closure of a DAG as one bitset row per vertex.
class Reachability {
 public:
  explicit Reachability(const DependencyGraph& graph);
  bool reaches(VertexId from, VertexId to) const;

 private:
  size_t words_;
  std::vector<uint64_t> bits_;
};

// Pairs that have no directed path in the graph.
std::vector<PiecePair> missing_paths(const DependencyGraph& graph,
                                     std::span<const PiecePair> pairs);

// Number of vertices on the longest path.
size_t longest_path_vertices(const DependencyGraph& graph);

// Framed binary trace format ("DGTR").
std::string dump_trace(std::span<const TraceEvent> events);
std::vector<TraceEvent> load_trace(std::string_view data);
void write_trace_file(const std::string& path, std::span<const TraceEvent> events);
std::vector<TraceEvent> read_trace_file(const std::string& path);

}  // namespace dgcc
