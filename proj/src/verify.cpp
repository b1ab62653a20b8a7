#include "dgcc/verify.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dgcc/codec.hpp"
#include "dgcc/error.hpp"

namespace dgcc {

void TraceRecorder::commit(std::vector<TraceEvent>&& events) {
  std::lock_guard lk(mu_);
  if (events_.empty()) {
    events_ = std::move(events);
    return;
  }
  events_.insert(events_.end(), events.begin(), events.end());
}

std::vector<TraceEvent> TraceRecorder::sorted() const {
  std::vector<TraceEvent> out;
  {
    std::lock_guard lk(mu_);
    out = events_;
  }
  std::sort(out.begin(), out.end(),
            [](const TraceEvent& a, const TraceEvent& b) { return a.seq < b.seq; });
  return out;
}

size_t TraceRecorder::size() const {
  std::lock_guard lk(mu_);
  return events_.size();
}

void TraceRecorder::clear() {
  std::lock_guard lk(mu_);
  events_.clear();
}

OracleResult serial_oracle(const ProcedureRegistry& registry, std::span<const Transaction> batch,
                           const Storage& initial, bool record_trace) {
  OracleResult out;
  Storage store = initial.clone();
  TraceRecorder recorder;
  for (size_t i = 1; i < batch.size(); ++i) {
    if (batch[i].ts <= batch[i - 1].ts) {
      fail(ErrorCode::kScheduling, "oracle batch must be timestamp-ordered");
    }
  }
  for (const Transaction& t : batch) {
    ChoppedTransaction c = chop(registry, t);
    std::vector<TraceEvent> events;
    DirectAccess direct(store);
    bool aborted = false;
    // Pieces run in index order, which is a linear extension of the logic order.
    for (uint32_t p = 0; p < c.pieces.size(); ++p) {
      std::optional<TracingAccess> tracing;
      DataAccess* access = &direct;
      if (record_trace) access = &tracing.emplace(direct, recorder, c.ts, p, events);
      bool ok = c.run_piece(p, *access);
      if (!ok) {
        if (c.pieces[p].kind != PieceKind::kConditionCheck) {
          fail(ErrorCode::kScheduling, "normal piece reported failure in oracle");
        }
        aborted = true;
        break;
      }
    }
    out.outcomes.push_back(aborted ? Outcome::kAborted : Outcome::kCommitted);
    if (record_trace && !aborted) recorder.commit(std::move(events));
  }
  out.digest = store.snapshot_digest();
  if (record_trace) out.trace = recorder.sorted();
  return out;
}

const char* conflict_kind_name(ConflictKind kind) noexcept {
  switch (kind) {
    case ConflictKind::kWriteWrite: return "ww";
    case ConflictKind::kWriteRead: return "wr";
    case ConflictKind::kReadWrite: return "rw";
  }
  return "?";
}

namespace {

struct ConflictGraph {
  std::vector<Timestamp> txns;
  std::unordered_map<Timestamp, uint32_t> index;
  // Per vertex: successor -> first edge seen for that pair.
  std::vector<std::map<uint32_t, ConflictEdge>> out;
  size_t edges = 0;

  uint32_t vertex(Timestamp ts) {
    auto [it, fresh] = index.emplace(ts, static_cast<uint32_t>(txns.size()));
    if (fresh) {
      txns.push_back(ts);
      out.emplace_back();
    }
    return it->second;
  }

  void add(Timestamp from, Timestamp to, ConflictKind kind, const Key& key) {
    if (from == to) return;
    uint32_t a = vertex(from), b = vertex(to);
    if (out[a].emplace(b, ConflictEdge{from, to, kind, key}).second) ++edges;
  }
};

// Iterative DFS; returns the edges of one cycle or empty.
std::vector<ConflictEdge> find_cycle(const ConflictGraph& g, bool skip_rw) {
  const size_t n = g.txns.size();
  std::vector<uint8_t> color(n, 0);  // 0 white, 1 on stack, 2 done
  std::vector<const ConflictEdge*> via(n, nullptr);
  struct Frame {
    uint32_t v;
    std::map<uint32_t, ConflictEdge>::const_iterator it;
  };
  for (uint32_t root = 0; root < n; ++root) {
    if (color[root]) continue;
    std::vector<Frame> stack{{root, g.out[root].begin()}};
    color[root] = 1;
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.it == g.out[f.v].end()) {
        color[f.v] = 2;
        stack.pop_back();
        continue;
      }
      const auto& [w, edge] = *f.it;
      ++f.it;
      if (skip_rw && edge.kind == ConflictKind::kReadWrite) continue;
      if (color[w] == 1) {
        std::vector<ConflictEdge> cycle{edge};
        uint32_t cur = f.v;
        while (cur != w) {
          cycle.push_back(*via[cur]);
          cur = g.index.at(via[cur]->from);
        }
        std::reverse(cycle.begin(), cycle.end());
        return cycle;
      }
      if (color[w] == 0) {
        color[w] = 1;
        via[w] = &edge;
        stack.push_back({w, g.out[w].begin()});
      }
    }
  }
  return {};
}

}  // namespace

ScheduleVerdict schedule_check(std::span<const TraceEvent> trace) {
  ConflictGraph g;
  struct KeyState {
    std::optional<Timestamp> writer;
    std::vector<Timestamp> readers;  // since the last write
  };
  std::unordered_map<Key, KeyState, KeyHash> keys;
  uint64_t last_seq = 0;
  for (const TraceEvent& e : trace) {
    if (e.seq < last_seq) fail(ErrorCode::kScheduling, "trace not ordered by seq");
    last_seq = e.seq;
    g.vertex(e.ts);
    KeyState& s = keys[e.key];
    if (e.op == TraceOp::kRead) {
      if (s.writer) g.add(*s.writer, e.ts, ConflictKind::kWriteRead, e.key);
      s.readers.push_back(e.ts);
    } else {
      if (s.writer) g.add(*s.writer, e.ts, ConflictKind::kWriteWrite, e.key);
      for (Timestamp r : s.readers) g.add(r, e.ts, ConflictKind::kReadWrite, e.key);
      s.writer = e.ts;
      s.readers.clear();
    }
  }
  ScheduleVerdict v;
  v.transactions = g.txns.size();
  v.edges = g.edges;
  v.witness = find_cycle(g, false);
  v.serializable = v.witness.empty();
  if (!v.serializable) {
    bool consecutive_rw = false;
    for (size_t i = 0; i < v.witness.size(); ++i) {
      const auto& a = v.witness[i];
      const auto& b = v.witness[(i + 1) % v.witness.size()];
      if (a.kind == ConflictKind::kReadWrite && b.kind == ConflictKind::kReadWrite) {
        consecutive_rw = true;
      }
    }
    v.write_skew = consecutive_rw && find_cycle(g, true).empty();
  }
  return v;
}

std::string describe(const ScheduleVerdict& verdict) {
  std::ostringstream os;
  if (verdict.serializable) {
    os << "serializable (" << verdict.transactions << " txns, " << verdict.edges << " edges)";
    return os.str();
  }
  os << (verdict.write_skew ? "write-skew cycle:" : "cycle:");
  for (const auto& e : verdict.witness) {
    os << " " << e.from << "-" << conflict_kind_name(e.kind) << "[" << e.key.to_string() << "]->"
       << e.to;
  }
  return os.str();
}

namespace {
bool intersects(const std::vector<Key>& a, const std::vector<Key>& b) {
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      return true;
    }
  }
  return false;
}
}  // namespace

std::vector<PiecePair> graph_edge_oracle(std::span<const ChoppedTransaction> batch) {
  struct Flat {
    Timestamp ts;
    uint32_t piece;
    std::vector<Key> access;
    const std::vector<Key>* writes;
  };
  std::vector<Flat> flat;
  for (const auto& t : batch) {
    for (const auto& p : t.pieces) flat.push_back({t.ts, p.index, p.accessset(), &p.writeset});
  }
  std::vector<PiecePair> out;
  for (size_t i = 0; i < flat.size(); ++i) {
    for (size_t j = 0; j < flat.size(); ++j) {
      const Flat& a = flat[i];
      const Flat& b = flat[j];
      if (a.ts >= b.ts) continue;
      if (intersects(*a.writes, b.access) || intersects(a.access, *b.writes)) {
        out.push_back({a.ts, a.piece, b.ts, b.piece});
      }
    }
  }
  return out;
}

Reachability::Reachability(const DependencyGraph& graph)
    : words_((graph.vertex_count() + 63) / 64), bits_(graph.vertex_count() * words_, 0) {
  auto order = topological_order(graph);
  if (!order) fail(ErrorCode::kScheduling, "reachability needs an acyclic graph");
  for (auto it = order->rbegin(); it != order->rend(); ++it) {
    VertexId v = *it;
    uint64_t* row = &bits_[v * words_];
    for (const auto& a : graph.successors(v)) {
      row[a.vertex / 64] |= uint64_t{1} << (a.vertex % 64);
      const uint64_t* sub = &bits_[a.vertex * words_];
      for (size_t w = 0; w < words_; ++w) row[w] |= sub[w];
    }
  }
}

bool Reachability::reaches(VertexId from, VertexId to) const {
  return (bits_[from * words_ + to / 64] >> (to % 64)) & 1;
}

std::vector<PiecePair> missing_paths(const DependencyGraph& graph,
                                     std::span<const PiecePair> pairs) {
  Reachability r(graph);
  std::vector<PiecePair> out;
  for (const auto& p : pairs) {
    auto a = graph.find(p.from_ts, p.from_piece);
    auto b = graph.find(p.to_ts, p.to_piece);
    if (!a || !b || !r.reaches(*a, *b)) out.push_back(p);
  }
  return out;
}

size_t longest_path_vertices(const DependencyGraph& graph) {
  auto order = topological_order(graph);
  if (!order) fail(ErrorCode::kScheduling, "longest path needs an acyclic graph");
  std::vector<size_t> depth(graph.vertex_count(), 1);
  size_t best = 0;
  for (VertexId v : *order) {
    best = std::max(best, depth[v]);
    for (const auto& a : graph.successors(v)) depth[a.vertex] = std::max(depth[a.vertex], depth[v] + 1);
  }
  return best;
}

namespace {
constexpr std::string_view kTraceMagic = "DGTR";
constexpr uint16_t kTraceVersion = 1;
}  // namespace

std::string dump_trace(std::span<const TraceEvent> events) {
  std::string out = file_header(kTraceMagic, kTraceVersion);
  for (const auto& e : events) {
    ByteWriter w;
    w.u64(e.seq);
    w.u64(e.ts);
    w.u32(e.piece);
    w.u16(e.key.table);
    w.bytes(e.key.primary);
    w.u8(static_cast<uint8_t>(e.op));
    append_frame(out, w.str());
  }
  return out;
}

std::vector<TraceEvent> load_trace(std::string_view data) {
  auto header = check_file_header(data, kTraceMagic, kTraceVersion);
  if (!header) fail(ErrorCode::kDecode, "not a trace file");
  std::vector<TraceEvent> out;
  size_t off = *header;
  for (;;) {
    FrameRead f = read_frame(data, off);
    if (f.status == FrameStatus::kEnd) break;
    if (f.status == FrameStatus::kTorn) fail(ErrorCode::kDecode, "torn trace frame");
    ByteReader r(f.payload);
    TraceEvent e;
    e.seq = r.u64();
    e.ts = r.u64();
    e.piece = r.u32();
    e.key.table = r.u16();
    e.key.primary = std::string(r.bytes());
    uint8_t op = r.u8();
    if (op > 1 || !r.done()) fail(ErrorCode::kDecode, "bad trace event");
    e.op = static_cast<TraceOp>(op);
    out.push_back(std::move(e));
    off = f.next_offset;
  }
  return out;
}

void write_trace_file(const std::string& path, std::span<const TraceEvent> events) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  std::string data = dump_trace(events);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) fail(ErrorCode::kIo, "cannot write trace file " + path);
}

std::vector<TraceEvent> read_trace_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot open trace file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_trace(ss.str());
}

}  // namespace dgcc
