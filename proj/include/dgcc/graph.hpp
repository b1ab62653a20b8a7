#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dgcc/txmodel.hpp"

namespace dgcc {

using VertexId = uint32_t;

enum class EdgeKind : uint8_t { kLogic = 0, kTimeOrder = 1 };

struct Vertex {
  Timestamp ts = 0;
  uint32_t txn = 0;    // position of the owning transaction in the graph
  uint32_t piece = 0;  // piece index within that transaction
  PieceKind kind = PieceKind::kNormal;
};

struct Adjacent {
  VertexId vertex;
  EdgeKind kind;
};

// Vertices are the pieces of one transaction set; edges are deduplicated per
// ordered vertex pair. Immutable once built; execution works on a copy of the
// in-degree vector.
class DependencyGraph {
 public:
  explicit DependencyGraph(uint64_t graph_id = 0) : graph_id_(graph_id) {}

  uint64_t graph_id() const noexcept { return graph_id_; }
  size_t vertex_count() const noexcept { return vertices_.size(); }
  size_t edge_count() const noexcept { return edge_count_; }
  size_t transaction_count() const noexcept { return txns_.size(); }

  const Vertex& vertex(VertexId v) const { return vertices_.at(v); }
  std::span<const Adjacent> successors(VertexId v) const { return out_.at(v); }
  std::span<const Adjacent> predecessors(VertexId v) const { return in_.at(v); }
  uint32_t in_degree(VertexId v) const { return static_cast<uint32_t>(in_.at(v).size()); }
  bool has_edge(VertexId from, VertexId to) const;
  std::optional<EdgeKind> edge_kind(VertexId from, VertexId to) const;

  const std::vector<ChoppedTransaction>& transactions() const noexcept { return txns_; }
  const ChoppedTransaction& transaction(uint32_t txn) const { return txns_.at(txn); }
  const TransactionPiece& piece(VertexId v) const;
  VertexId vertex_of(uint32_t txn, uint32_t piece) const;
  // Looks a vertex up by (timestamp, piece index).
  std::optional<VertexId> find(Timestamp ts, uint32_t piece) const;

  // Appends a transaction and one vertex per piece; returns its position.
  uint32_t add_transaction(ChoppedTransaction txn);
  // Returns false when the edge already existed.
  bool add_edge(VertexId from, VertexId to, EdgeKind kind);

  // Adjacency-list text: one line per vertex "ts.piece [N|C] -> ts.piece:L|T ...",
  // piece numbers 1-based.
  std::string dump() const;

 private:
  uint64_t graph_id_;
  std::vector<ChoppedTransaction> txns_;
  std::vector<VertexId> first_vertex_;
  std::vector<Vertex> vertices_;
  std::vector<std::vector<Adjacent>> out_;
  std::vector<std::vector<Adjacent>> in_;
  std::unordered_set<uint64_t> edges_;
  std::unordered_map<Timestamp, uint32_t> txn_by_ts_;
  size_t edge_count_ = 0;
};

// Per-key construction state: the latest writer and the dominating set.
// The dominating set is either exactly {latest_writer} or the readers
// admitted after it.
struct RecordMeta {
  std::optional<VertexId> latest_writer;
  std::vector<VertexId> dominators;
  bool dominated_by_writer = false;
};

// Builds one graph on one thread. Transactions must arrive in timestamp order.
class GraphBuilder {
 public:
  explicit GraphBuilder(uint64_t graph_id = 0) : graph_(graph_id) {}

  // Chops and admits a transaction, then adds its logic edges.
  void add(const ProcedureRegistry& registry, const Transaction& txn);
  void add(ChoppedTransaction txn);

  const DependencyGraph& graph() const noexcept { return graph_; }
  const RecordMeta* meta(const Key& key) const;
  const std::unordered_map<Key, RecordMeta, KeyHash>& metas() const noexcept { return meta_; }

  DependencyGraph finish() && { return std::move(graph_); }

  // Inner steps, exposed for tests.
  void admit_piece(VertexId v);
  void add_logic_edges(uint32_t txn);

 private:
  void link(VertexId from, VertexId to);

  DependencyGraph graph_;
  std::unordered_map<Key, RecordMeta, KeyHash> meta_;
  Timestamp last_ts_ = 0;
  bool any_ = false;
};

DependencyGraph build_graph(const ProcedureRegistry& registry,
                            std::span<const Transaction> transactions, uint64_t graph_id = 0);

// Vertex ids in a topological order, or nullopt if the graph has a cycle.
std::optional<std::vector<VertexId>> topological_order(const DependencyGraph& graph);

}  // namespace dgcc
