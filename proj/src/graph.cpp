#include "dgcc/graph.hpp"

#include <algorithm>
#include <deque>

#include "dgcc/error.hpp"

namespace dgcc {

namespace {
uint64_t pair_key(VertexId from, VertexId to) {
  return (static_cast<uint64_t>(from) << 32) | to;
}
}  // namespace

bool DependencyGraph::has_edge(VertexId from, VertexId to) const {
  return edges_.count(pair_key(from, to)) != 0;
}

std::optional<EdgeKind> DependencyGraph::edge_kind(VertexId from, VertexId to) const {
  if (!has_edge(from, to)) return std::nullopt;
  for (const auto& a : out_[from]) {
    if (a.vertex == to) return a.kind;
  }
  return std::nullopt;
}

const TransactionPiece& DependencyGraph::piece(VertexId v) const {
  const Vertex& vx = vertices_.at(v);
  return txns_[vx.txn].pieces[vx.piece];
}

VertexId DependencyGraph::vertex_of(uint32_t txn, uint32_t piece) const {
  if (piece >= txns_.at(txn).pieces.size()) {
    fail(ErrorCode::kScheduling, "piece index out of range");
  }
  return first_vertex_[txn] + piece;
}

std::optional<VertexId> DependencyGraph::find(Timestamp ts, uint32_t piece) const {
  auto it = txn_by_ts_.find(ts);
  if (it == txn_by_ts_.end() || piece >= txns_[it->second].pieces.size()) return std::nullopt;
  return first_vertex_[it->second] + piece;
}

uint32_t DependencyGraph::add_transaction(ChoppedTransaction txn) {
  auto pos = static_cast<uint32_t>(txns_.size());
  if (!txn_by_ts_.emplace(txn.ts, pos).second) {
    fail(ErrorCode::kScheduling, "timestamp " + std::to_string(txn.ts) + " appears twice in a graph");
  }
  first_vertex_.push_back(static_cast<VertexId>(vertices_.size()));
  for (const auto& p : txn.pieces) {
    vertices_.push_back(Vertex{txn.ts, pos, p.index, p.kind});
  }
  out_.resize(vertices_.size());
  in_.resize(vertices_.size());
  txns_.push_back(std::move(txn));
  return pos;
}

bool DependencyGraph::add_edge(VertexId from, VertexId to, EdgeKind kind) {
  if (from >= vertices_.size() || to >= vertices_.size() || from == to) {
    fail(ErrorCode::kScheduling, "invalid edge");
  }
  if (!edges_.insert(pair_key(from, to)).second) return false;
  out_[from].push_back({to, kind});
  in_[to].push_back({from, kind});
  ++edge_count_;
  return true;
}

std::string DependencyGraph::dump() const {
  auto name = [&](VertexId v) {
    return std::to_string(vertices_[v].ts) + "." + std::to_string(vertices_[v].piece + 1);
  };
  std::string out = "graph " + std::to_string(graph_id_) + " vertices " +
                    std::to_string(vertices_.size()) + " edges " + std::to_string(edge_count_) +
                    "\n";
  for (VertexId v = 0; v < vertices_.size(); ++v) {
    out += name(v);
    out += vertices_[v].kind == PieceKind::kConditionCheck ? " [C]" : " [N]";
    out += " ->";
    std::vector<Adjacent> succ = out_[v];
    std::sort(succ.begin(), succ.end(),
              [](const Adjacent& a, const Adjacent& b) { return a.vertex < b.vertex; });
    for (const auto& a : succ) {
      out += " " + name(a.vertex) + (a.kind == EdgeKind::kLogic ? ":L" : ":T");
    }
    out += "\n";
  }
  return out;
}

void GraphBuilder::add(const ProcedureRegistry& registry, const Transaction& txn) {
  add(chop(registry, txn));
}

void GraphBuilder::add(ChoppedTransaction txn) {
  if (any_ && txn.ts <= last_ts_) {
    fail(ErrorCode::kScheduling, "transactions must be added in increasing timestamp order");
  }
  any_ = true;
  last_ts_ = txn.ts;
  size_t n = txn.pieces.size();
  uint32_t pos = graph_.add_transaction(std::move(txn));
  for (uint32_t p = 0; p < n; ++p) admit_piece(graph_.vertex_of(pos, p));
  add_logic_edges(pos);
}

const RecordMeta* GraphBuilder::meta(const Key& key) const {
  auto it = meta_.find(key);
  return it == meta_.end() ? nullptr : &it->second;
}

void GraphBuilder::link(VertexId from, VertexId to) {
  // Conflicts between pieces of one transaction order them like a logic
  // dependency; only cross-transaction conflicts are timestamp-order edges.
  EdgeKind kind = graph_.vertex(from).ts == graph_.vertex(to).ts ? EdgeKind::kLogic
                                                                 : EdgeKind::kTimeOrder;
  graph_.add_edge(from, to, kind);
}

void GraphBuilder::admit_piece(VertexId v) {
  const TransactionPiece& piece = graph_.piece(v);
  for (const Key& k : piece.accessset()) {
    const bool writes = piece.writes(k);
    RecordMeta& m = meta_[k];
    if (m.dominators.empty()) {
      m.dominators.push_back(v);
      m.dominated_by_writer = writes;
      if (writes) m.latest_writer = v;
      continue;
    }
    if (m.dominated_by_writer) {
      link(m.dominators.front(), v);
      m.dominators.assign(1, v);
      m.dominated_by_writer = writes;
      if (writes) m.latest_writer = v;
      continue;
    }
    if (!writes) {
      if (m.latest_writer) link(*m.latest_writer, v);
      m.dominators.push_back(v);
    } else {
      for (VertexId r : m.dominators) link(r, v);
      m.dominators.assign(1, v);
      m.dominated_by_writer = true;
      m.latest_writer = v;
    }
  }
}

void GraphBuilder::add_logic_edges(uint32_t txn) {
  const ChoppedTransaction& t = graph_.transaction(txn);
  for (auto [from, to] : t.logic_edges) {
    graph_.add_edge(graph_.vertex_of(txn, from), graph_.vertex_of(txn, to), EdgeKind::kLogic);
  }
}

DependencyGraph build_graph(const ProcedureRegistry& registry,
                            std::span<const Transaction> transactions, uint64_t graph_id) {
  GraphBuilder b(graph_id);
  for (const auto& t : transactions) b.add(registry, t);
  return std::move(b).finish();
}

std::optional<std::vector<VertexId>> topological_order(const DependencyGraph& graph) {
  std::vector<uint32_t> indeg(graph.vertex_count());
  std::deque<VertexId> ready;
  for (VertexId v = 0; v < graph.vertex_count(); ++v) {
    indeg[v] = graph.in_degree(v);
    if (indeg[v] == 0) ready.push_back(v);
  }
  std::vector<VertexId> order;
  order.reserve(graph.vertex_count());
  while (!ready.empty()) {
    VertexId v = ready.front();
    ready.pop_front();
    order.push_back(v);
    for (const auto& a : graph.successors(v)) {
      if (--indeg[a.vertex] == 0) ready.push_back(a.vertex);
    }
  }
  if (order.size() != graph.vertex_count()) return std::nullopt;
  return order;
}

}  // namespace dgcc
