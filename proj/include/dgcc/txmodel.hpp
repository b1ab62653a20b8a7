#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dgcc/storage.hpp"

namespace dgcc {

using Timestamp = uint64_t;
using FunctionId = uint16_t;
using Clock = std::chrono::steady_clock;

// Decoded procedure parameters: a flat list of integers. The byte encoding
// is a varint count followed by zigzag varints.
using Params = std::vector<int64_t>;

std::string encode_params(std::span<const int64_t> params);
// Throws Error(kDecode) on malformed input.
Params decode_params(std::string_view bytes);

struct Transaction {
  Timestamp ts = 0;
  FunctionId procedure = 0;
  std::string params;
  Clock::time_point arrival_time{};
};

enum class PieceKind : uint8_t { kNormal, kConditionCheck };

// Data access seen by piece bodies. Each concurrency-control protocol
// provides its own implementation.
class DataAccess {
 public:
  virtual ~DataAccess() = default;
  virtual std::optional<Record> read(const Key& key) = 0;
  // Upsert.
  virtual void write(const Key& key, Record record) = 0;
  virtual void insert(const Key& key, Record record) = 0;
  virtual void erase(const Key& key) = 0;
};

// Direct storage access; correct only when the caller guarantees that
// conflicting accesses never overlap (DGCC rounds, serial execution).
class DirectAccess final : public DataAccess {
 public:
  explicit DirectAccess(Storage& storage) : storage_(storage) {}
  std::optional<Record> read(const Key& key) override { return storage_.get(key); }
  void write(const Key& key, Record record) override { storage_.put(key, std::move(record)); }
  void insert(const Key& key, Record record) override { storage_.insert(key, std::move(record)); }
  void erase(const Key& key) override { storage_.erase(key); }

 private:
  Storage& storage_;
};

struct PieceContext {
  DataAccess& data;
  const Params& params;
  Timestamp ts;
  // Instance number for repeated templates (item index of an order, op
  // index of a YCSB transaction).
  uint32_t instance;
};

// Normal bodies return true. A ConditionCheck body returns false to abort
// its transaction.
using PieceBody = std::function<bool(PieceContext&)>;

struct KeySets {
  std::vector<Key> reads;
  std::vector<Key> writes;
};

// Key-derivation rule: pure function of (params, instance).
using KeyRule = std::function<void(const Params&, uint32_t instance, KeySets& out)>;
using InstanceRule = std::function<uint32_t(const Params&)>;

struct PieceTemplate {
  std::string name;
  PieceKind kind = PieceKind::kNormal;
  // Number of pieces this template expands to; nullptr means exactly one.
  InstanceRule instances;
  KeyRule keys;
  PieceBody body;
};

struct StoredProcedure {
  FunctionId function_id = 0;
  std::string name;
  std::vector<PieceTemplate> templates;
  // Partial order over template indices (from, to): every instance of
  // `from` precedes every instance of `to`.
  std::vector<std::pair<uint32_t, uint32_t>> logic_edges;
  // Minimum parameter count accepted by decode.
  size_t min_params = 0;
};

struct TransactionPiece {
  Timestamp owner_ts = 0;
  uint32_t index = 0;
  uint32_t template_index = 0;
  uint32_t instance = 0;
  PieceKind kind = PieceKind::kNormal;
  std::vector<Key> readset;   // sorted, unique
  std::vector<Key> writeset;  // sorted, unique
  const PieceBody* body = nullptr;

  bool reads(const Key& k) const;
  bool writes(const Key& k) const;
  // Sorted union of readset and writeset.
  std::vector<Key> accessset() const;
};

struct ChoppedTransaction {
  Timestamp ts = 0;
  FunctionId procedure = 0;
  std::string raw_params;  // byte-identical to Transaction::params
  std::shared_ptr<const Params> params;
  std::vector<TransactionPiece> pieces;
  // Piece-index pairs (from, to), from < to, deduplicated and sorted.
  std::vector<std::pair<uint32_t, uint32_t>> logic_edges;

  // Runs one piece body against `data`.
  bool run_piece(uint32_t index, DataAccess& data) const;
};

class ProcedureRegistry {
 public:
  // Validates template structure: at most one ConditionCheck, placed first
  // and logically preceding every other template; logic edges go forward.
  void add(StoredProcedure proc);
  const StoredProcedure& get(FunctionId id) const;
  bool contains(FunctionId id) const noexcept;
  std::vector<FunctionId> ids() const;

 private:
  std::vector<std::unique_ptr<StoredProcedure>> procs_;
};

// Materializes pieces with concrete key sets from the transaction's params.
// Pure function of (procedure, params, ts).
ChoppedTransaction chop(const ProcedureRegistry& registry, const Transaction& txn);

struct AccessSets {
  std::vector<Key> readset;
  std::vector<Key> writeset;
};
// Per-transaction union of the per-piece sets.
AccessSets access_union(std::span<const TransactionPiece> pieces);

// Wraps another access and raises Error(kAudit) on any read outside the
// piece's accessset or any write outside its writeset. Records every key
// actually touched.
class AuditingAccess final : public DataAccess {
 public:
  AuditingAccess(DataAccess& inner, const TransactionPiece& piece)
      : inner_(inner), piece_(piece) {}

  std::optional<Record> read(const Key& key) override;
  void write(const Key& key, Record record) override;
  void insert(const Key& key, Record record) override;
  void erase(const Key& key) override;

  const std::vector<Key>& touched() const noexcept { return touched_; }

 private:
  void check_read(const Key& key);
  void check_write(const Key& key);

  DataAccess& inner_;
  const TransactionPiece& piece_;
  std::vector<Key> touched_;
};

}  // namespace dgcc
