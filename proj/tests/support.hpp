#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dgcc/graph.hpp"
#include "dgcc/storage.hpp"
#include "dgcc/txmodel.hpp"

namespace dgcc::testing {

// Table 1 keyed by one u64 with a single decimal counter column.
inline constexpr TableId kScriptTable = 1;
inline constexpr FunctionId kScriptProc = 100;

inline Key key(uint64_t id) { return Key::of(kScriptTable, {id}); }

inline int64_t counter(const std::optional<Record>& r) {
  return r ? std::stoll((*r)[0]) : 0;
}
inline Record counter_record(int64_t v) { return {std::to_string(v)}; }

inline void add_script_table(Storage& s) {
  s.create_table(TableSchema{kScriptTable, "kv", {24}, 8, 1024});
}

// A piece of a script transaction: keys it reads and keys it writes.
struct ScriptPiece {
  std::vector<uint64_t> reads;
  std::vector<uint64_t> writes;
};

enum class CheckMode : int64_t { kNone = 0, kPass = 1, kFail = 2, kOddFails = 3 };

struct Script {
  CheckMode check = CheckMode::kNone;
  std::vector<uint64_t> check_keys;
  std::vector<ScriptPiece> pieces;
};

// Params: [mode, n_check, check keys..., n_pieces, (n_r, r..., n_w, w...)...]
inline std::string encode_script(const Script& s) {
  Params p{static_cast<int64_t>(s.check), static_cast<int64_t>(s.check_keys.size())};
  for (auto k : s.check_keys) p.push_back(static_cast<int64_t>(k));
  p.push_back(static_cast<int64_t>(s.pieces.size()));
  for (const auto& pc : s.pieces) {
    p.push_back(static_cast<int64_t>(pc.reads.size()));
    for (auto k : pc.reads) p.push_back(static_cast<int64_t>(k));
    p.push_back(static_cast<int64_t>(pc.writes.size()));
    for (auto k : pc.writes) p.push_back(static_cast<int64_t>(k));
  }
  return encode_params(p);
}

inline Script decode_script(const Params& p) {
  Script s;
  size_t i = 0;
  s.check = static_cast<CheckMode>(p.at(i++));
  for (int64_t n = p.at(i++); n > 0; --n) s.check_keys.push_back(p.at(i++));
  for (int64_t n = p.at(i++); n > 0; --n) {
    ScriptPiece pc;
    for (int64_t m = p.at(i++); m > 0; --m) pc.reads.push_back(p.at(i++));
    for (int64_t m = p.at(i++); m > 0; --m) pc.writes.push_back(p.at(i++));
    s.pieces.push_back(std::move(pc));
  }
  return s;
}

// Check piece reads its keys and fails on kFail, or on kOddFails when the
// sum of their counters is odd. Body pieces write, to every write key,
// old value + sum of read counters + ts * 31 + piece.
inline StoredProcedure script_procedure() {
  StoredProcedure proc;
  proc.function_id = kScriptProc;
  proc.name = "script";
  proc.min_params = 3;

  PieceTemplate check;
  check.name = "check";
  check.kind = PieceKind::kConditionCheck;
  check.instances = [](const Params& p) -> uint32_t { return p[0] == 0 ? 0 : 1; };
  check.keys = [](const Params& p, uint32_t, KeySets& out) {
    for (auto k : decode_script(p).check_keys) out.reads.push_back(key(k));
  };
  check.body = [](PieceContext& ctx) {
    Script s = decode_script(ctx.params);
    int64_t sum = 0;
    for (auto k : s.check_keys) sum += counter(ctx.data.read(key(k)));
    if (s.check == CheckMode::kFail) return false;
    if (s.check == CheckMode::kOddFails) return sum % 2 == 0;
    return true;
  };

  PieceTemplate body;
  body.name = "body";
  body.instances = [](const Params& p) {
    return static_cast<uint32_t>(decode_script(p).pieces.size());
  };
  body.keys = [](const Params& p, uint32_t inst, KeySets& out) {
    const ScriptPiece pc = decode_script(p).pieces.at(inst);
    for (auto k : pc.reads) out.reads.push_back(key(k));
    for (auto k : pc.writes) out.writes.push_back(key(k));
  };
  body.body = [](PieceContext& ctx) {
    const ScriptPiece pc = decode_script(ctx.params).pieces.at(ctx.instance);
    int64_t sum = 0;
    for (auto k : pc.reads) sum += counter(ctx.data.read(key(k)));
    for (auto k : pc.writes) {
      int64_t old = counter(ctx.data.read(key(k)));
      ctx.data.write(key(k), counter_record(old + sum + static_cast<int64_t>(ctx.ts) * 31 +
                                            ctx.instance));
    }
    return true;
  };

  proc.templates = {std::move(check), std::move(body)};
  proc.logic_edges = {{0, 1}};
  return proc;
}

inline ProcedureRegistry script_registry() {
  ProcedureRegistry r;
  r.add(script_procedure());
  return r;
}

inline Transaction script_txn(Timestamp ts, const Script& s) {
  return Transaction{ts, kScriptProc, encode_script(s), {}};
}

// Chops a check-free script and replaces its logic edges; the registry must
// outlive the result.
inline ChoppedTransaction chopped(const ProcedureRegistry& registry, Timestamp ts,
                                  std::vector<ScriptPiece> pieces,
                                  std::vector<std::pair<uint32_t, uint32_t>> logic = {}) {
  ChoppedTransaction c = chop(registry, script_txn(ts, Script{CheckMode::kNone, {}, std::move(pieces)}));
  c.logic_edges = std::move(logic);
  return c;
}

// The three-transaction example: keys A..E are 1..5.
//   T1: T11 w{B}, T12 w{A}, T13 w{C}; logic T11->T12, T11->T13
//   T2: T21 r{C,D} w{A}, T22 r{D}
//   T3: T31 w{D}, T32 r{A}, T33 r{E}
inline std::vector<ChoppedTransaction> three_txn_example(const ProcedureRegistry& r) {
  enum : uint64_t { A = 1, B, C, D, E };
  std::vector<ChoppedTransaction> out;
  out.push_back(chopped(r, 1, {{{}, {B}}, {{}, {A}}, {{}, {C}}}, {{0, 1}, {0, 2}}));
  out.push_back(chopped(r, 2, {{{C, D}, {A}}, {{D}, {}}}));
  out.push_back(chopped(r, 3, {{{}, {D}}, {{A}, {}}, {{E}, {}}}));
  return out;
}

// Random script transactions over `keys` keys.
inline std::vector<Transaction> random_scripts(std::mt19937_64& rng, size_t count, uint64_t keys,
                                               Timestamp first_ts = 1, bool checks = true) {
  std::vector<Transaction> out;
  for (size_t i = 0; i < count; ++i) {
    Script s;
    if (checks && rng() % 4 == 0) {
      s.check = rng() % 3 == 0 ? CheckMode::kFail : CheckMode::kOddFails;
      s.check_keys = {rng() % keys};
    }
    size_t pieces = 1 + rng() % 4;
    for (size_t p = 0; p < pieces; ++p) {
      ScriptPiece pc;
      size_t nr = rng() % 3, nw = rng() % 2;
      if (nr + nw == 0) nw = 1;
      for (size_t j = 0; j < nr; ++j) pc.reads.push_back(rng() % keys);
      for (size_t j = 0; j < nw; ++j) pc.writes.push_back(rng() % keys);
      s.pieces.push_back(pc);
    }
    out.push_back(script_txn(first_ts + i, s));
  }
  return out;
}

}  // namespace dgcc::testing
