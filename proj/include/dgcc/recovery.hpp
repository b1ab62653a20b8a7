#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "dgcc/executor.hpp"
#include "dgcc/graph.hpp"

namespace dgcc {

struct LogDependency {
  Timestamp ts = 0;
  uint32_t piece = 0;
  EdgeKind kind = EdgeKind::kTimeOrder;

  bool operator==(const LogDependency&) const = default;
};

// One vertex: enough to re-chop the piece and rebuild its in-edges.
struct LogRecord {
  uint64_t graph_id = 0;
  Timestamp ts = 0;
  uint32_t piece = 0;
  FunctionId function_id = 0;
  std::string params;
  std::vector<LogDependency> deps;

  bool operator==(const LogRecord&) const = default;
};

std::string encode_log_record(const LogRecord& r);
std::string encode_graph_terminator(uint64_t graph_id, uint32_t vertex_count);

std::vector<LogRecord> log_records(const DependencyGraph& graph);

// Rebuilds a graph from its records: transactions are re-chopped for their
// bodies only; edges come from the logged dependencies.
DependencyGraph rebuild_graph(const ProcedureRegistry& registry, uint64_t graph_id,
                              const std::vector<LogRecord>& records);

// Vertices and edges (with kinds) identified by (ts, piece).
bool same_structure(const DependencyGraph& a, const DependencyGraph& b);

struct LogPosition {
  uint32_t segment = 0;
  uint64_t offset = 0;  // end of the graph terminator
};

struct LogWriterOptions {
  // A new segment starts at the next graph once this size is reached.
  uint64_t segment_bytes = 64ull << 20;
  bool sync = true;
  // Test hook: the n-th log_graph call (1-based) fails before writing.
  uint64_t fail_at_graph = 0;
};

// Appends each graph with one write and one fdatasync. New writers never
// append to an existing segment.
class LogWriter {
 public:
  LogWriter(std::filesystem::path dir, LogWriterOptions options = {});
  ~LogWriter();
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;

  // Throws Error(kDurability) on I/O failure.
  LogPosition log_graph(const DependencyGraph& graph);

  // Test hook: writes only the first `bytes` of the graph's encoding, with
  // no flush, and returns. Models a crash mid-write.
  void log_graph_torn(const DependencyGraph& graph, size_t bytes);

  uint64_t flushes() const noexcept { return flushes_; }
  uint64_t bytes_written() const noexcept { return bytes_; }
  uint64_t graphs_logged() const noexcept { return graphs_; }
  // Directory syncs issued when segments are created.
  uint64_t metadata_syncs() const noexcept { return metadata_syncs_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  void open_segment();
  std::string encode(const DependencyGraph& graph) const;

  std::filesystem::path dir_;
  LogWriterOptions options_;
  int fd_ = -1;
  uint32_t segment_ = 0;
  uint64_t segment_size_ = 0;
  uint64_t segment_graphs_ = 0;
  uint64_t flushes_ = 0;
  uint64_t bytes_ = 0;
  uint64_t graphs_ = 0;
  uint64_t metadata_syncs_ = 0;
};

std::string segment_name(uint32_t index);
std::vector<std::filesystem::path> list_segments(const std::filesystem::path& dir);

struct CheckpointManifest {
  uint64_t watermark = 0;  // last graph whose effects are in the sections
  Timestamp last_ts = 0;
  size_t sections = 0;
  std::vector<std::string> files;
  std::vector<uint64_t> rows;
};

// Section images of a store taken at a graph boundary.
struct CheckpointImage {
  uint64_t watermark = 0;
  Timestamp last_ts = 0;
  std::vector<std::string> sections;  // encoded section files
};

// Copies the store into S encoded sections, one thread per section. The
// store must be quiesced for the duration of the call.
CheckpointImage capture_checkpoint(const Storage& storage, size_t sections, uint64_t watermark,
                                   Timestamp last_ts);

// Writes the sections (one thread each) and then the manifest via rename.
// On failure the partial directory is removed and Error thrown (kIo for I/O,
// kDecode for a malformed image); the previous checkpoint stays valid.
CheckpointManifest write_checkpoint(const std::filesystem::path& dir, const CheckpointImage& image);

// Capture + write in one call.
CheckpointManifest checkpoint(const Storage& storage, const std::filesystem::path& dir,
                              size_t sections, uint64_t watermark, Timestamp last_ts);

// The newest checkpoint whose manifest is complete, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& dir);
CheckpointManifest read_manifest(const std::filesystem::path& checkpoint_dir);
// Loads sections into a store whose tables already exist.
void load_checkpoint(const std::filesystem::path& checkpoint_dir, Storage& storage);

// Removes checkpoints older than the newest complete one.
void prune_checkpoints(const std::filesystem::path& dir);

// Writes checkpoint images on a background thread.
class Checkpointer {
 public:
  explicit Checkpointer(std::filesystem::path dir) : dir_(std::move(dir)) {}
  ~Checkpointer();

  // Returns false (and drops the image) when a write is still running.
  bool submit(CheckpointImage image);
  void wait();
  bool busy() const noexcept { return busy_.load(); }
  uint64_t completed() const noexcept { return completed_.load(); }
  uint64_t failed() const noexcept { return failed_.load(); }

 private:
  std::filesystem::path dir_;
  std::thread worker_;
  std::atomic<bool> busy_{false};
  std::atomic<uint64_t> completed_{0};
  std::atomic<uint64_t> failed_{0};
};

struct RecoveryReport {
  uint64_t checkpoint_watermark = 0;
  bool used_checkpoint = false;
  uint64_t graphs_replayed = 0;
  uint64_t last_graph_id = 0;  // newest durable graph, replayed or not
  Timestamp last_ts = 0;
  std::vector<Timestamp> replayed_ts;
  std::vector<Outcome> replayed_outcomes;
  uint64_t truncated_bytes = 0;
  // Graphs dropped because they had no terminator.
  uint64_t incomplete_graphs = 0;
};

struct RecoveryOptions {
  size_t workers = 1;
  // Truncate torn tails on disk; when false the files are left untouched.
  bool truncate = true;
};

// `storage` must be empty with its tables created. Loads the newest
// checkpoint, then replays every complete logged graph with an id above its
// watermark, in log order.
RecoveryReport recover(const std::filesystem::path& log_dir,
                       const std::filesystem::path& checkpoint_dir,
                       const ProcedureRegistry& registry, Storage& storage,
                       RecoveryOptions options = {});

struct LoggedGraph {
  uint64_t graph_id = 0;
  std::vector<LogRecord> records;
};

struct LogScan {
  std::vector<LoggedGraph> graphs;  // complete graphs in log order
  uint64_t torn_bytes = 0;
  uint64_t incomplete_graphs = 0;
  // Per segment: byte length of its valid prefix.
  std::vector<std::pair<std::filesystem::path, uint64_t>> valid_prefix;
};

LogScan scan_log(const std::filesystem::path& log_dir);

}  // namespace dgcc
