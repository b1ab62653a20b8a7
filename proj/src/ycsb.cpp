#include <algorithm>
#include <cmath>

#include "dgcc/error.hpp"
#include "dgcc/workloads.hpp"

namespace dgcc {

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::string field_payload(uint64_t seed) {
  std::string s(kYcsbFieldBytes, 'a');
  uint64_t h = mix64(seed);
  for (size_t i = 0; i < s.size(); ++i) {
    if (i % 8 == 0) h = mix64(h);
    s[i] = static_cast<char>('a' + (h >> ((i % 8) * 8)) % 26);
  }
  return s;
}

void check_params(const Params& p) {
  if (p.empty() || p[0] < 0 || p.size() != 1 + 2 * static_cast<size_t>(p[0])) {
    fail(ErrorCode::kDecode, "malformed ycsb params");
  }
}

}  // namespace

std::string num(int64_t v) { return std::to_string(v); }

int64_t to_num(const std::string& s) {
  if (s.empty()) return 0;
  return std::stoll(s);
}

void YcsbConfig::validate() const {
  if (!(theta >= 0) || theta > 10) fail(ErrorCode::kUsage, "theta must be in [0, 10]");
  if (!(rw_ratio > 0) || !std::isfinite(rw_ratio)) fail(ErrorCode::kUsage, "rw-ratio must be > 0");
  if (table_size == 0) fail(ErrorCode::kUsage, "table size must be > 0");
  if (ops_per_txn == 0) fail(ErrorCode::kUsage, "ops per transaction must be > 0");
  if (ops_per_txn > table_size) fail(ErrorCode::kUsage, "ops per transaction exceed the table size");
}

StoredProcedure ycsb_procedure() {
  StoredProcedure proc;
  proc.function_id = kYcsbProc;
  proc.name = "ycsb";
  proc.min_params = 1;
  PieceTemplate op;
  op.name = "op";
  op.instances = [](const Params& p) {
    check_params(p);
    return static_cast<uint32_t>(p[0]);
  };
  op.keys = [](const Params& p, uint32_t i, KeySets& out) {
    Key k = Key::of(kYcsbTable, {static_cast<uint64_t>(p[1 + 2 * i])});
    out.reads.push_back(k);
    if (p[2 + 2 * i] != 0) out.writes.push_back(k);
  };
  op.body = [](PieceContext& ctx) {
    uint64_t id = static_cast<uint64_t>(ctx.params[1 + 2 * ctx.instance]);
    Key k = Key::of(kYcsbTable, {id});
    auto rec = ctx.data.read(k);
    if (ctx.params[2 + 2 * ctx.instance] == 0 || !rec) return true;
    int64_t version = to_num((*rec)[0]) + 1;
    (*rec)[0] = num(version);
    (*rec)[1 + (ctx.ts + ctx.instance) % (kYcsbFields - 1)] =
        field_payload(id * 1000003 + static_cast<uint64_t>(version));
    ctx.data.write(k, std::move(*rec));
    return true;
  };
  proc.templates.push_back(std::move(op));
  return proc;
}

Record ycsb_initial_record(uint64_t key) {
  Record r;
  r.push_back(num(0));
  for (size_t f = 1; f < kYcsbFields; ++f) r.push_back(field_payload(key * 16 + f));
  return r;
}

YcsbWorkload::YcsbWorkload(YcsbConfig cfg)
    : cfg_(cfg), zipf_((cfg.validate(), cfg.table_size), cfg.theta), rng_(cfg.seed) {
  registry_.add(ycsb_procedure());
}

void YcsbWorkload::create_tables(Storage& storage) const {
  TableSchema s;
  s.id = kYcsbTable;
  s.name = "usertable";
  s.column_widths.assign(kYcsbFields, kYcsbFieldBytes);
  s.column_widths[0] = 24;
  s.key_width = 8;
  s.initial_capacity = cfg_.table_size;
  storage.create_table(std::move(s));
}

void YcsbWorkload::populate(Storage& storage) const {
  create_tables(storage);
  for (uint64_t k = 0; k < cfg_.table_size; ++k) {
    storage.insert(Key::of(kYcsbTable, {k}), ycsb_initial_record(k));
  }
}

Transaction YcsbWorkload::next() {
  Params p;
  p.reserve(1 + 2 * cfg_.ops_per_txn);
  p.push_back(cfg_.ops_per_txn);
  std::vector<uint64_t> chosen;
  chosen.reserve(cfg_.ops_per_txn);
  double write_p = 1.0 / (cfg_.rw_ratio + 1.0);
  while (chosen.size() < cfg_.ops_per_txn) {
    uint64_t k = zipf_(rng_) - 1;
    if (std::find(chosen.begin(), chosen.end(), k) != chosen.end()) continue;
    chosen.push_back(k);
    p.push_back(static_cast<int64_t>(k));
    p.push_back(uniform01(rng_) < write_p ? 1 : 0);
  }
  Transaction t;
  t.procedure = kYcsbProc;
  t.params = encode_params(p);
  return t;
}

}  // namespace dgcc
