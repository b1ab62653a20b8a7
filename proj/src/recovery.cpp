#include "dgcc/recovery.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "dgcc/codec.hpp"
#include "dgcc/error.hpp"

namespace fs = std::filesystem;

namespace dgcc {

namespace {

constexpr std::string_view kLogMagic = "DGCC";
constexpr uint16_t kLogVersion = 1;
constexpr std::string_view kCheckpointMagic = "DGCK";
constexpr uint16_t kCheckpointVersion = 1;
constexpr uint8_t kVertexFrame = 1;
constexpr uint8_t kTerminatorFrame = 2;
// A vertex whose params equal those of the preceding record of the same
// transaction; they are not repeated on disk.
constexpr uint8_t kVertexSameParamsFrame = 3;
constexpr uint8_t kRowFrame = 1;
constexpr uint8_t kSectionEndFrame = 2;
constexpr const char* kManifest = "MANIFEST";

std::string errno_text(const std::string& what) {
  return what + ": " + std::strerror(errno);
}

void write_all(int fd, std::string_view data, ErrorCode code, const std::string& what) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(code, errno_text(what));
    }
    data.remove_prefix(static_cast<size_t>(n));
  }
}

void sync_dir(const fs::path& dir, ErrorCode code) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd < 0) fail(code, errno_text("open directory " + dir.string()));
  int rc = ::fsync(fd);
  ::close(fd);
  if (rc != 0) fail(code, errno_text("fsync directory " + dir.string()));
}

void write_file_durable(const fs::path& path, std::string_view data, ErrorCode code) {
  int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) fail(code, errno_text("create " + path.string()));
  try {
    write_all(fd, data, code, "write " + path.string());
    if (::fdatasync(fd) != 0) fail(code, errno_text("fdatasync " + path.string()));
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

namespace {

std::string encode_vertex(const LogRecord& r, bool elide_params) {
  ByteWriter w;
  w.u8(elide_params ? kVertexSameParamsFrame : kVertexFrame);
  w.u64(r.graph_id);
  w.u64(r.ts);
  w.u32(r.piece);
  w.u16(r.function_id);
  if (!elide_params) w.bytes(r.params);
  w.varint(r.deps.size());
  for (const auto& d : r.deps) {
    w.varint(d.ts);
    w.varint(d.piece);
    w.u8(static_cast<uint8_t>(d.kind));
  }
  return w.take();
}

}  // namespace

std::string encode_log_record(const LogRecord& r) { return encode_vertex(r, false); }

std::string encode_graph_terminator(uint64_t graph_id, uint32_t vertex_count) {
  ByteWriter w;
  w.u8(kTerminatorFrame);
  w.u64(graph_id);
  w.u32(vertex_count);
  return w.take();
}

std::vector<LogRecord> log_records(const DependencyGraph& graph) {
  std::vector<LogRecord> out;
  out.reserve(graph.vertex_count());
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    const Vertex& vx = graph.vertex(v);
    const ChoppedTransaction& t = graph.transaction(vx.txn);
    LogRecord r;
    r.graph_id = graph.graph_id();
    r.ts = vx.ts;
    r.piece = vx.piece;
    r.function_id = t.procedure;
    r.params = t.raw_params;
    for (const auto& a : graph.predecessors(v)) {
      const Vertex& p = graph.vertex(a.vertex);
      r.deps.push_back({p.ts, p.piece, a.kind});
    }
    out.push_back(std::move(r));
  }
  return out;
}

DependencyGraph rebuild_graph(const ProcedureRegistry& registry, uint64_t graph_id,
                              const std::vector<LogRecord>& records) {
  DependencyGraph g(graph_id);
  size_t i = 0;
  while (i < records.size()) {
    size_t j = i;
    while (j < records.size() && records[j].ts == records[i].ts) ++j;
    const LogRecord& first = records[i];
    ChoppedTransaction c = chop(registry, Transaction{first.ts, first.function_id, first.params, {}});
    if (c.pieces.size() != j - i) {
      fail(ErrorCode::kDecode, "logged piece count of txn " + std::to_string(first.ts) +
                                   " does not match its procedure");
    }
    for (size_t k = i; k < j; ++k) {
      if (records[k].piece != k - i || records[k].params != first.params ||
          records[k].function_id != first.function_id) {
        fail(ErrorCode::kDecode, "inconsistent log records for txn " + std::to_string(first.ts));
      }
    }
    g.add_transaction(std::move(c));
    i = j;
  }
  for (const auto& r : records) {
    auto to = g.find(r.ts, r.piece);
    for (const auto& d : r.deps) {
      auto from = g.find(d.ts, d.piece);
      if (!from || !to) fail(ErrorCode::kDecode, "log dependency names an unknown vertex");
      g.add_edge(*from, *to, d.kind);
    }
  }
  return g;
}

bool same_structure(const DependencyGraph& a, const DependencyGraph& b) {
  if (a.vertex_count() != b.vertex_count() || a.edge_count() != b.edge_count()) return false;
  using Edge = std::tuple<Timestamp, uint32_t, uint8_t>;
  for (VertexId v = 0; v < a.vertex_count(); ++v) {
    const Vertex& x = a.vertex(v);
    auto w = b.find(x.ts, x.piece);
    if (!w || b.vertex(*w).kind != x.kind) return false;
    std::set<Edge> ea, eb;
    for (const auto& s : a.successors(v)) {
      ea.emplace(a.vertex(s.vertex).ts, a.vertex(s.vertex).piece, static_cast<uint8_t>(s.kind));
    }
    for (const auto& s : b.successors(*w)) {
      eb.emplace(b.vertex(s.vertex).ts, b.vertex(s.vertex).piece, static_cast<uint8_t>(s.kind));
    }
    if (ea != eb) return false;
  }
  return true;
}

std::string segment_name(uint32_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "segment-%06u.log", index);
  return buf;
}

std::vector<fs::path> list_segments(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (name.rfind("segment-", 0) == 0 && name.size() > 12 &&
        name.substr(name.size() - 4) == ".log") {
      out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {
uint32_t segment_index(const fs::path& p) {
  std::string name = p.filename().string();
  return static_cast<uint32_t>(std::stoul(name.substr(8, name.size() - 12)));
}
}  // namespace

LogWriter::LogWriter(fs::path dir, LogWriterOptions options)
    : dir_(std::move(dir)), options_(options) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) fail(ErrorCode::kDurability, "cannot create log directory " + dir_.string());
  for (const auto& p : list_segments(dir_)) segment_ = std::max(segment_, segment_index(p));
  open_segment();
}

LogWriter::~LogWriter() {
  if (fd_ >= 0) ::close(fd_);
}

void LogWriter::open_segment() {
  if (fd_ >= 0) ::close(fd_);
  ++segment_;
  fs::path path = dir_ / segment_name(segment_);
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_APPEND, 0644);
  if (fd_ < 0) fail(ErrorCode::kDurability, errno_text("create segment " + path.string()));
  std::string header = file_header(kLogMagic, kLogVersion);
  write_all(fd_, header, ErrorCode::kDurability, "write segment header");
  if (options_.sync) {
    if (::fdatasync(fd_) != 0) fail(ErrorCode::kDurability, errno_text("fdatasync segment"));
    sync_dir(dir_, ErrorCode::kDurability);
    ++metadata_syncs_;
  }
  segment_size_ = header.size();
  segment_graphs_ = 0;
  bytes_ += header.size();
}

std::string LogWriter::encode(const DependencyGraph& graph) const {
  std::string buf;
  const LogRecord* prev = nullptr;
  auto records = log_records(graph);
  for (const auto& r : records) {
    bool same = prev && prev->ts == r.ts && prev->params == r.params;
    append_frame(buf, encode_vertex(r, same));
    prev = &r;
  }
  append_frame(buf, encode_graph_terminator(graph.graph_id(),
                                            static_cast<uint32_t>(graph.vertex_count())));
  return buf;
}

LogPosition LogWriter::log_graph(const DependencyGraph& graph) {
  ++graphs_;
  if (options_.fail_at_graph != 0 && graphs_ == options_.fail_at_graph) {
    fail(ErrorCode::kDurability, "injected log failure at graph " + std::to_string(graph.graph_id()));
  }
  if (segment_graphs_ > 0 && segment_size_ >= options_.segment_bytes) open_segment();
  std::string buf = encode(graph);
  write_all(fd_, buf, ErrorCode::kDurability, "append log segment");
  if (options_.sync && ::fdatasync(fd_) != 0) {
    fail(ErrorCode::kDurability, errno_text("fdatasync log segment"));
  }
  ++flushes_;
  ++segment_graphs_;
  segment_size_ += buf.size();
  bytes_ += buf.size();
  return LogPosition{segment_, segment_size_};
}

void LogWriter::log_graph_torn(const DependencyGraph& graph, size_t bytes) {
  std::string buf = encode(graph);
  buf.resize(std::min(bytes, buf.size()));
  write_all(fd_, buf, ErrorCode::kDurability, "append log segment");
  segment_size_ += buf.size();
}

LogScan scan_log(const fs::path& log_dir) {
  LogScan scan;
  bool stopped = false;
  for (const auto& path : list_segments(log_dir)) {
    std::string data = read_file(path);
    if (stopped) {
      scan.torn_bytes += data.size();
      scan.valid_prefix.emplace_back(path, 0);
      continue;
    }
    auto header = check_file_header(data, kLogMagic, kLogVersion);
    if (!header) {
      // A segment whose header never became durable.
      scan.torn_bytes += data.size();
      scan.valid_prefix.emplace_back(path, 0);
      stopped = true;
      continue;
    }
    size_t off = *header;
    size_t valid_end = off;
    LoggedGraph current;
    bool open = false;
    for (;;) {
      FrameRead f = read_frame(data, off);
      if (f.status != FrameStatus::kOk) {
        if (f.status == FrameStatus::kTorn) stopped = true;
        break;
      }
      ByteReader r(f.payload);
      uint8_t type = r.u8();
      uint64_t graph_id = r.u64();
      if (type == kVertexFrame || type == kVertexSameParamsFrame) {
        if (open && graph_id != current.graph_id) {
          stopped = true;  // interleaved graphs: treat as corruption
          break;
        }
        LogRecord rec;
        rec.graph_id = graph_id;
        rec.ts = r.u64();
        rec.piece = r.u32();
        rec.function_id = r.u16();
        if (type == kVertexFrame) {
          rec.params = std::string(r.bytes());
        } else if (open && current.records.back().ts == rec.ts) {
          rec.params = current.records.back().params;
        } else {
          stopped = true;  // nothing to inherit from
          break;
        }
        uint64_t n = r.varint();
        for (uint64_t i = 0; i < n; ++i) {
          LogDependency d;
          d.ts = r.varint();
          d.piece = static_cast<uint32_t>(r.varint());
          d.kind = static_cast<EdgeKind>(r.u8());
          rec.deps.push_back(d);
        }
        current.graph_id = graph_id;
        current.records.push_back(std::move(rec));
        open = true;
      } else if (type == kTerminatorFrame) {
        uint32_t count = r.u32();
        if ((open && graph_id != current.graph_id) || count != current.records.size()) {
          stopped = true;
          break;
        }
        current.graph_id = graph_id;
        scan.graphs.push_back(std::move(current));
        current = LoggedGraph{};
        open = false;
        valid_end = f.next_offset;
      } else {
        stopped = true;
        break;
      }
      off = f.next_offset;
    }
    if (open) ++scan.incomplete_graphs;
    scan.torn_bytes += data.size() - valid_end;
    scan.valid_prefix.emplace_back(path, valid_end);
  }
  return scan;
}

namespace {

std::string checkpoint_dir_name(uint64_t watermark) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "ckpt-%020llu", static_cast<unsigned long long>(watermark));
  return buf;
}

std::string section_name(size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "section-%04zu.dat", i);
  return buf;
}

}  // namespace

CheckpointImage capture_checkpoint(const Storage& storage, size_t sections, uint64_t watermark,
                                   Timestamp last_ts) {
  if (sections == 0) fail(ErrorCode::kUsage, "checkpoint needs at least one section");
  CheckpointImage img;
  img.watermark = watermark;
  img.last_ts = last_ts;
  img.sections.resize(sections);
  auto encode_section = [&](size_t s) {
    std::string out = file_header(kCheckpointMagic, kCheckpointVersion);
    uint64_t rows = 0;
    storage.for_each_in_section(s, sections, [&](const Key& k, const Record& rec) {
      ByteWriter w;
      w.u8(kRowFrame);
      w.u16(k.table);
      w.bytes(k.primary);
      w.u32(static_cast<uint32_t>(rec.size()));
      for (const auto& col : rec) w.bytes(col);
      append_frame(out, w.str());
      ++rows;
    });
    ByteWriter end;
    end.u8(kSectionEndFrame);
    end.u64(rows);
    append_frame(out, end.str());
    img.sections[s] = std::move(out);
  };
  std::vector<std::thread> threads;
  for (size_t s = 1; s < sections; ++s) threads.emplace_back(encode_section, s);
  encode_section(0);
  for (auto& t : threads) t.join();
  return img;
}

namespace {

// Rows in an encoded section; throws Error(kDecode) unless it ends cleanly.
uint64_t decode_section(std::string_view data, Storage* into) {
  auto header = check_file_header(data, kCheckpointMagic, kCheckpointVersion);
  if (!header) fail(ErrorCode::kDecode, "not a checkpoint section");
  size_t off = *header;
  uint64_t rows = 0;
  for (;;) {
    FrameRead f = read_frame(data, off);
    if (f.status != FrameStatus::kOk) fail(ErrorCode::kDecode, "truncated checkpoint section");
    ByteReader r(f.payload);
    uint8_t type = r.u8();
    if (type == kSectionEndFrame) {
      if (r.u64() != rows) fail(ErrorCode::kDecode, "checkpoint section row count mismatch");
      return rows;
    }
    if (type != kRowFrame) fail(ErrorCode::kDecode, "bad checkpoint frame");
    Key k;
    k.table = r.u16();
    k.primary = std::string(r.bytes());
    Record rec(r.u32());
    for (auto& col : rec) col = std::string(r.bytes());
    if (into) into->put(k, std::move(rec));
    ++rows;
    off = f.next_offset;
  }
}

}  // namespace

CheckpointManifest write_checkpoint(const fs::path& dir, const CheckpointImage& image) {
  fs::path target = dir / checkpoint_dir_name(image.watermark);
  CheckpointManifest m;
  m.watermark = image.watermark;
  m.last_ts = image.last_ts;
  m.sections = image.sections.size();
  try {
    std::error_code ec;
    fs::remove_all(target, ec);
    fs::create_directories(target, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create checkpoint directory " + target.string());
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(image.sections.size());
    m.files.resize(image.sections.size());
    m.rows.resize(image.sections.size());
    auto write_section = [&](size_t s) {
      try {
        m.files[s] = section_name(s);
        m.rows[s] = decode_section(image.sections[s], nullptr);
        write_file_durable(target / m.files[s], image.sections[s], ErrorCode::kIo);
      } catch (...) {
        errors[s] = std::current_exception();
      }
    };
    for (size_t s = 1; s < image.sections.size(); ++s) threads.emplace_back(write_section, s);
    write_section(0);
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    nlohmann::json j{{"format", 1},       {"watermark", m.watermark}, {"last_ts", m.last_ts},
                     {"sections", m.sections}, {"files", m.files},   {"rows", m.rows}};
    write_file_durable(target / "MANIFEST.tmp", j.dump(2), ErrorCode::kIo);
    fs::rename(target / "MANIFEST.tmp", target / kManifest);
    sync_dir(target, ErrorCode::kIo);
    sync_dir(dir, ErrorCode::kIo);
  } catch (const Error&) {
    std::error_code ec;
    fs::remove_all(target, ec);
    throw;
  } catch (const std::exception& e) {
    std::error_code ec;
    fs::remove_all(target, ec);
    fail(ErrorCode::kIo, std::string("checkpoint write failed: ") + e.what());
  }
  return m;
}

CheckpointManifest checkpoint(const Storage& storage, const fs::path& dir, size_t sections,
                              uint64_t watermark, Timestamp last_ts) {
  return write_checkpoint(dir, capture_checkpoint(storage, sections, watermark, last_ts));
}

CheckpointManifest read_manifest(const fs::path& checkpoint_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(checkpoint_dir / kManifest));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("bad checkpoint manifest: ") + e.what());
  }
  CheckpointManifest m;
  try {
    m.watermark = j.at("watermark").get<uint64_t>();
    m.last_ts = j.at("last_ts").get<uint64_t>();
    m.sections = j.at("sections").get<size_t>();
    m.files = j.at("files").get<std::vector<std::string>>();
    m.rows = j.at("rows").get<std::vector<uint64_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kDecode, std::string("bad checkpoint manifest: ") + e.what());
  }
  if (m.files.size() != m.sections || m.rows.size() != m.sections) {
    fail(ErrorCode::kDecode, "checkpoint manifest section count mismatch");
  }
  return m;
}

std::optional<fs::path> latest_checkpoint(const fs::path& dir) {
  std::optional<fs::path> best;
  if (!fs::exists(dir)) return best;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (!e.is_directory() || name.rfind("ckpt-", 0) != 0) continue;
    if (!fs::exists(e.path() / kManifest)) continue;
    if (!best || e.path().filename() > best->filename()) best = e.path();
  }
  return best;
}

void load_checkpoint(const fs::path& checkpoint_dir, Storage& storage) {
  CheckpointManifest m = read_manifest(checkpoint_dir);
  for (size_t s = 0; s < m.sections; ++s) {
    uint64_t rows = decode_section(read_file(checkpoint_dir / m.files[s]), &storage);
    if (rows != m.rows[s]) fail(ErrorCode::kDecode, "checkpoint section disagrees with manifest");
  }
}

void prune_checkpoints(const fs::path& dir) {
  auto keep = latest_checkpoint(dir);
  if (!keep) return;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::string name = e.path().filename().string();
    if (e.is_directory() && name.rfind("ckpt-", 0) == 0 && e.path() != *keep &&
        e.path().filename() < keep->filename()) {
      std::error_code ec;
      fs::remove_all(e.path(), ec);
    }
  }
}

Checkpointer::~Checkpointer() { wait(); }

bool Checkpointer::submit(CheckpointImage image) {
  if (busy_.load()) return false;
  if (worker_.joinable()) worker_.join();
  busy_ = true;
  worker_ = std::thread([this, img = std::move(image)] {
    try {
      write_checkpoint(dir_, img);
      prune_checkpoints(dir_);
      ++completed_;
    } catch (...) {
      ++failed_;
    }
    busy_ = false;
  });
  return true;
}

void Checkpointer::wait() {
  if (worker_.joinable()) worker_.join();
}

RecoveryReport recover(const fs::path& log_dir, const fs::path& checkpoint_dir,
                       const ProcedureRegistry& registry, Storage& storage,
                       RecoveryOptions options) {
  RecoveryReport rep;
  if (storage.live_count() != 0) fail(ErrorCode::kUsage, "recovery needs an empty store");
  if (auto ck = latest_checkpoint(checkpoint_dir)) {
    CheckpointManifest m = read_manifest(*ck);
    load_checkpoint(*ck, storage);
    rep.used_checkpoint = true;
    rep.checkpoint_watermark = m.watermark;
    rep.last_graph_id = m.watermark;
    rep.last_ts = m.last_ts;
  }

  LogScan scan = scan_log(log_dir);
  rep.truncated_bytes = scan.torn_bytes;
  rep.incomplete_graphs = scan.incomplete_graphs;
  if (options.truncate) {
    for (const auto& [path, valid] : scan.valid_prefix) {
      if (valid == 0) {
        fs::remove(path);
      } else if (valid < fs::file_size(path)) {
        if (::truncate(path.c_str(), static_cast<off_t>(valid)) != 0) {
          fail(ErrorCode::kIo, errno_text("truncate " + path.string()));
        }
      }
    }
  }

  BatchConfig cfg;
  cfg.worker_count = std::max<size_t>(options.workers, 1);
  WorkerPool pool(cfg.worker_count);
  GraphExecutor executor(pool, cfg);
  uint64_t prev = 0;
  for (const auto& lg : scan.graphs) {
    if (lg.graph_id <= prev && prev != 0) {
      fail(ErrorCode::kDecode, "log graph ids are not increasing");
    }
    prev = lg.graph_id;
    for (const auto& r : lg.records) rep.last_ts = std::max(rep.last_ts, r.ts);
    rep.last_graph_id = std::max(rep.last_graph_id, lg.graph_id);
    if (rep.used_checkpoint && lg.graph_id <= rep.checkpoint_watermark) continue;
    DependencyGraph g = rebuild_graph(registry, lg.graph_id, lg.records);
    GraphResult res = executor.execute(g, storage);
    for (uint32_t t = 0; t < g.transaction_count(); ++t) {
      rep.replayed_ts.push_back(g.transaction(t).ts);
      rep.replayed_outcomes.push_back(res.outcomes[t]);
    }
    ++rep.graphs_replayed;
  }
  return rep;
}

}  // namespace dgcc
