#include "dgcc/txmodel.hpp"

#include <algorithm>

#include "dgcc/codec.hpp"
#include "dgcc/error.hpp"

namespace dgcc {

std::string encode_params(std::span<const int64_t> params) {
  ByteWriter w;
  w.varint(params.size());
  for (int64_t v : params) w.svarint(v);
  return w.take();
}

Params decode_params(std::string_view bytes) {
  ByteReader r(bytes);
  uint64_t n = r.varint();
  // Each value takes at least one byte.
  if (n > r.remaining()) fail(ErrorCode::kDecode, "parameter count exceeds payload");
  Params out;
  out.reserve(n);
  for (uint64_t i = 0; i < n; ++i) out.push_back(r.svarint());
  if (!r.done()) fail(ErrorCode::kDecode, "trailing bytes after parameters");
  return out;
}

namespace {
bool sorted_contains(const std::vector<Key>& v, const Key& k) {
  return std::binary_search(v.begin(), v.end(), k);
}

void normalize(std::vector<Key>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}
}  // namespace

bool TransactionPiece::reads(const Key& k) const { return sorted_contains(readset, k); }
bool TransactionPiece::writes(const Key& k) const { return sorted_contains(writeset, k); }

std::vector<Key> TransactionPiece::accessset() const {
  std::vector<Key> out;
  out.reserve(readset.size() + writeset.size());
  std::set_union(readset.begin(), readset.end(), writeset.begin(), writeset.end(),
                 std::back_inserter(out));
  return out;
}

bool ChoppedTransaction::run_piece(uint32_t index, DataAccess& data) const {
  const TransactionPiece& p = pieces.at(index);
  PieceContext ctx{data, *params, ts, p.instance};
  return (*p.body)(ctx);
}

void ProcedureRegistry::add(StoredProcedure proc) {
  const size_t n = proc.templates.size();
  if (n == 0) fail(ErrorCode::kSchema, "procedure " + proc.name + " has no pieces");
  for (const auto& t : proc.templates) {
    if (!t.keys || !t.body) {
      fail(ErrorCode::kSchema, "piece template " + t.name + " needs key and body rules");
    }
  }
  for (auto [from, to] : proc.logic_edges) {
    if (from >= n || to >= n || from >= to) {
      fail(ErrorCode::kSchema, "procedure " + proc.name + " has a logic edge that is not forward");
    }
  }
  size_t checks = 0;
  for (size_t i = 0; i < n; ++i) {
    if (proc.templates[i].kind == PieceKind::kConditionCheck) {
      ++checks;
      if (i != 0) fail(ErrorCode::kSchema, "condition check must be the first template");
    }
  }
  if (checks > 1) fail(ErrorCode::kSchema, "at most one condition check per procedure");
  if (checks == 1) {
    // Every other template must be reachable from the check.
    std::vector<bool> seen(n, false);
    seen[0] = true;
    for (size_t i = 0; i < n; ++i) {
      if (!seen[i]) continue;
      for (auto [from, to] : proc.logic_edges) {
        if (from == i) seen[to] = true;
      }
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      fail(ErrorCode::kSchema, "condition check of " + proc.name + " must precede every piece");
    }
  }
  FunctionId id = proc.function_id;
  if (id >= procs_.size()) procs_.resize(id + 1);
  if (procs_[id]) fail(ErrorCode::kSchema, "function_id " + std::to_string(id) + " registered twice");
  procs_[id] = std::make_unique<StoredProcedure>(std::move(proc));
}

const StoredProcedure& ProcedureRegistry::get(FunctionId id) const {
  if (!contains(id)) fail(ErrorCode::kDecode, "unknown function_id " + std::to_string(id));
  return *procs_[id];
}

bool ProcedureRegistry::contains(FunctionId id) const noexcept {
  return id < procs_.size() && procs_[id] != nullptr;
}

std::vector<FunctionId> ProcedureRegistry::ids() const {
  std::vector<FunctionId> out;
  for (size_t i = 0; i < procs_.size(); ++i) {
    if (procs_[i]) out.push_back(static_cast<FunctionId>(i));
  }
  return out;
}

ChoppedTransaction chop(const ProcedureRegistry& registry, const Transaction& txn) {
  const StoredProcedure& proc = registry.get(txn.procedure);
  auto params = std::make_shared<const Params>(decode_params(txn.params));
  if (params->size() < proc.min_params) {
    fail(ErrorCode::kDecode, "procedure " + proc.name + " expects at least " +
                                 std::to_string(proc.min_params) + " parameters");
  }

  ChoppedTransaction out;
  out.ts = txn.ts;
  out.procedure = txn.procedure;
  out.raw_params = txn.params;
  out.params = params;

  // Piece index ranges per template.
  std::vector<std::pair<uint32_t, uint32_t>> ranges;
  ranges.reserve(proc.templates.size());
  for (uint32_t t = 0; t < proc.templates.size(); ++t) {
    const PieceTemplate& tpl = proc.templates[t];
    uint32_t count = tpl.instances ? tpl.instances(*params) : 1;
    uint32_t begin = static_cast<uint32_t>(out.pieces.size());
    for (uint32_t inst = 0; inst < count; ++inst) {
      KeySets ks;
      tpl.keys(*params, inst, ks);
      TransactionPiece p;
      p.owner_ts = txn.ts;
      p.index = static_cast<uint32_t>(out.pieces.size());
      p.template_index = t;
      p.instance = inst;
      p.kind = tpl.kind;
      p.readset = std::move(ks.reads);
      p.writeset = std::move(ks.writes);
      normalize(p.readset);
      normalize(p.writeset);
      p.body = &tpl.body;
      if (p.kind == PieceKind::kConditionCheck && !p.writeset.empty()) {
        fail(ErrorCode::kSchema, "condition check of " + proc.name + " declares writes");
      }
      if (p.kind == PieceKind::kNormal && p.readset.empty() && p.writeset.empty()) {
        fail(ErrorCode::kSchema, "piece " + tpl.name + " of " + proc.name + " has no keys");
      }
      out.pieces.push_back(std::move(p));
    }
    ranges.emplace_back(begin, static_cast<uint32_t>(out.pieces.size()));
  }

  for (auto [from, to] : proc.logic_edges) {
    for (uint32_t a = ranges[from].first; a < ranges[from].second; ++a) {
      for (uint32_t b = ranges[to].first; b < ranges[to].second; ++b) {
        out.logic_edges.emplace_back(a, b);
      }
    }
  }
  std::sort(out.logic_edges.begin(), out.logic_edges.end());
  out.logic_edges.erase(std::unique(out.logic_edges.begin(), out.logic_edges.end()),
                        out.logic_edges.end());
  return out;
}

AccessSets access_union(std::span<const TransactionPiece> pieces) {
  AccessSets out;
  for (const auto& p : pieces) {
    out.readset.insert(out.readset.end(), p.readset.begin(), p.readset.end());
    out.writeset.insert(out.writeset.end(), p.writeset.begin(), p.writeset.end());
  }
  normalize(out.readset);
  normalize(out.writeset);
  return out;
}

void AuditingAccess::check_read(const Key& key) {
  touched_.push_back(key);
  if (!piece_.reads(key) && !piece_.writes(key)) {
    fail(ErrorCode::kAudit, "piece " + std::to_string(piece_.owner_ts) + "." +
                                std::to_string(piece_.index) + " read undeclared key " +
                                key.to_string());
  }
}

void AuditingAccess::check_write(const Key& key) {
  touched_.push_back(key);
  if (!piece_.writes(key)) {
    fail(ErrorCode::kAudit, "piece " + std::to_string(piece_.owner_ts) + "." +
                                std::to_string(piece_.index) + " wrote undeclared key " +
                                key.to_string());
  }
}

std::optional<Record> AuditingAccess::read(const Key& key) {
  check_read(key);
  return inner_.read(key);
}

void AuditingAccess::write(const Key& key, Record record) {
  check_write(key);
  inner_.write(key, std::move(record));
}

void AuditingAccess::insert(const Key& key, Record record) {
  check_write(key);
  inner_.insert(key, std::move(record));
}

void AuditingAccess::erase(const Key& key) {
  check_write(key);
  inner_.erase(key);
}

}  // namespace dgcc
