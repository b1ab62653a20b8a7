#include <algorithm>
#include <cmath>
#include <sstream>

#include "dgcc/error.hpp"
#include "dgcc/workloads.hpp"

namespace dgcc {

namespace tpcc {
Key warehouse(uint64_t w) { return Key::of(kWarehouse, {w}); }
Key district(uint64_t w, uint64_t d) { return Key::of(kDistrict, {w, d}); }
Key customer(uint64_t w, uint64_t d, uint64_t c) { return Key::of(kCustomer, {w, d, c}); }
Key history(uint64_t w, uint64_t h) { return Key::of(kHistory, {w, h}); }
Key item(uint64_t i) { return Key::of(kItem, {i}); }
Key stock(uint64_t w, uint64_t i) { return Key::of(kStock, {w, i}); }
Key order(uint64_t w, uint64_t d, uint64_t o) { return Key::of(kOrder, {w, d, o}); }
Key new_order(uint64_t w, uint64_t d, uint64_t o) { return Key::of(kNewOrder, {w, d, o}); }
Key order_line(uint64_t w, uint64_t d, uint64_t o, uint64_t ol) {
  return Key::of(kOrderLine, {w, d, o, ol});
}
}  // namespace tpcc

using namespace tpcc;

namespace {

uint64_t u(const Params& p, size_t i) {
  if (i >= p.size() || p[i] < 0) fail(ErrorCode::kDecode, "malformed tpcc params");
  return static_cast<uint64_t>(p[i]);
}

uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

int64_t col(const Record& r, size_t i) { return to_num(r.at(i)); }

// ---- NewOrder: [w, d, c, o, ol_cnt, (i, supply_w, qty) * ol_cnt] ----

uint32_t lines(const Params& p) {
  uint64_t n = u(p, 4);
  if (p.size() != 5 + 3 * n) fail(ErrorCode::kDecode, "malformed new-order params");
  return static_cast<uint32_t>(n);
}

StoredProcedure new_order_proc() {
  StoredProcedure proc;
  proc.function_id = kNewOrderProc;
  proc.name = "new_order";
  proc.min_params = 5;
  PieceTemplate check;
  check.name = "items_valid";
  check.kind = PieceKind::kConditionCheck;
  check.keys = [](const Params& p, uint32_t, KeySets& out) {
    for (uint32_t l = 0; l < lines(p); ++l) out.reads.push_back(item(u(p, 5 + 3 * l)));
  };
  check.body = [](PieceContext& ctx) {
    const Params& p = ctx.params;
    for (uint32_t l = 0; l < lines(p); ++l) {
      if (!ctx.data.read(item(u(p, 5 + 3 * l)))) return false;
    }
    return true;
  };
  PieceTemplate head;
  head.name = "order";
  head.keys = [](const Params& p, uint32_t, KeySets& out) {
    uint64_t w = u(p, 0), d = u(p, 1), c = u(p, 2), o = u(p, 3);
    out.reads.push_back(warehouse(w));
    out.reads.push_back(customer(w, d, c));
    out.writes.push_back(district(w, d));
    out.writes.push_back(order(w, d, o));
    out.writes.push_back(new_order(w, d, o));
  };
  head.body = [](PieceContext& ctx) {
    const Params& p = ctx.params;
    uint64_t w = u(p, 0), d = u(p, 1), c = u(p, 2), o = u(p, 3);
    ctx.data.read(warehouse(w));
    ctx.data.read(customer(w, d, c));
    auto dist = ctx.data.read(district(w, d));
    if (dist) {
      (*dist)[2] = num(std::max<int64_t>(col(*dist, 2), static_cast<int64_t>(o) + 1));
      ctx.data.write(district(w, d), std::move(*dist));
    }
    ctx.data.insert(order(w, d, o), {num(static_cast<int64_t>(c)), num(static_cast<int64_t>(ctx.ts)),
                                     num(0), num(lines(p))});
    ctx.data.insert(new_order(w, d, o), {"1"});
    return true;
  };
  PieceTemplate line;
  line.name = "line";
  line.instances = [](const Params& p) { return lines(p); };
  line.keys = [](const Params& p, uint32_t l, KeySets& out) {
    uint64_t w = u(p, 0), d = u(p, 1), o = u(p, 3);
    uint64_t i = u(p, 5 + 3 * l), sw = u(p, 6 + 3 * l);
    out.reads.push_back(item(i));
    out.writes.push_back(stock(sw, i));
    out.writes.push_back(order_line(w, d, o, l + 1));
  };
  line.body = [](PieceContext& ctx) {
    const Params& p = ctx.params;
    uint32_t l = ctx.instance;
    uint64_t w = u(p, 0), d = u(p, 1), o = u(p, 3);
    uint64_t i = u(p, 5 + 3 * l), sw = u(p, 6 + 3 * l);
    int64_t qty = static_cast<int64_t>(u(p, 7 + 3 * l));
    auto it = ctx.data.read(item(i));
    int64_t price = it ? col(*it, 0) : 0;
    auto st = ctx.data.read(stock(sw, i));
    if (st) {
      int64_t q = col(*st, 0);
      (*st)[0] = num(q >= qty + 10 ? q - qty : q - qty + 91);
      (*st)[1] = num(col(*st, 1) + qty);
      (*st)[2] = num(col(*st, 2) + 1);
      if (sw != w) (*st)[3] = num(col(*st, 3) + 1);
      ctx.data.write(stock(sw, i), std::move(*st));
    }
    ctx.data.insert(order_line(w, d, o, l + 1),
                    {num(static_cast<int64_t>(i)), num(static_cast<int64_t>(sw)), num(qty),
                     num(qty * price), num(0)});
    return true;
  };
  proc.templates = {std::move(check), std::move(head), std::move(line)};
  proc.logic_edges = {{0, 1}, {0, 2}};
  return proc;
}

// ---- Payment: [w, d, c_w, c_d, c, amount, h] ----

StoredProcedure payment_proc() {
  StoredProcedure proc;
  proc.function_id = kPaymentProc;
  proc.name = "payment";
  proc.min_params = 7;
  PieceTemplate wh;
  wh.name = "warehouse";
  wh.keys = [](const Params& p, uint32_t, KeySets& out) { out.writes.push_back(warehouse(u(p, 0))); };
  wh.body = [](PieceContext& ctx) {
    Key k = warehouse(u(ctx.params, 0));
    if (auto r = ctx.data.read(k)) {
      (*r)[0] = num(col(*r, 0) + ctx.params[5]);
      ctx.data.write(k, std::move(*r));
    }
    return true;
  };
  PieceTemplate di;
  di.name = "district";
  di.keys = [](const Params& p, uint32_t, KeySets& out) {
    out.writes.push_back(district(u(p, 0), u(p, 1)));
  };
  di.body = [](PieceContext& ctx) {
    Key k = district(u(ctx.params, 0), u(ctx.params, 1));
    if (auto r = ctx.data.read(k)) {
      (*r)[0] = num(col(*r, 0) + ctx.params[5]);
      ctx.data.write(k, std::move(*r));
    }
    return true;
  };
  PieceTemplate cu;
  cu.name = "customer";
  cu.keys = [](const Params& p, uint32_t, KeySets& out) {
    out.writes.push_back(customer(u(p, 2), u(p, 3), u(p, 4)));
    out.writes.push_back(history(u(p, 0), u(p, 6)));
  };
  cu.body = [](PieceContext& ctx) {
    const Params& p = ctx.params;
    Key k = customer(u(p, 2), u(p, 3), u(p, 4));
    int64_t amount = p[5];
    if (auto r = ctx.data.read(k)) {
      (*r)[0] = num(col(*r, 0) - amount);
      (*r)[1] = num(col(*r, 1) + amount);
      (*r)[2] = num(col(*r, 2) + 1);
      ctx.data.write(k, std::move(*r));
    }
    ctx.data.insert(history(u(p, 0), u(p, 6)),
                    {num(p[2]), num(p[3]), num(p[4]), num(p[1]), num(amount)});
    return true;
  };
  proc.templates = {std::move(wh), std::move(di), std::move(cu)};
  proc.logic_edges = {{0, 1}, {1, 2}};
  return proc;
}

// ---- OrderStatus: [w, d, c, o, ol_cnt]; o = 0 when the customer has none ----

StoredProcedure order_status_proc() {
  StoredProcedure proc;
  proc.function_id = kOrderStatusProc;
  proc.name = "order_status";
  proc.min_params = 5;
  PieceTemplate cu;
  cu.name = "customer";
  cu.keys = [](const Params& p, uint32_t, KeySets& out) {
    out.reads.push_back(customer(u(p, 0), u(p, 1), u(p, 2)));
  };
  cu.body = [](PieceContext& ctx) {
    ctx.data.read(customer(u(ctx.params, 0), u(ctx.params, 1), u(ctx.params, 2)));
    return true;
  };
  PieceTemplate od;
  od.name = "order";
  od.instances = [](const Params& p) { return u(p, 3) == 0 ? 0u : 1u; };
  od.keys = [](const Params& p, uint32_t, KeySets& out) {
    uint64_t w = u(p, 0), d = u(p, 1), o = u(p, 3);
    out.reads.push_back(order(w, d, o));
    for (uint64_t l = 1; l <= u(p, 4); ++l) out.reads.push_back(order_line(w, d, o, l));
  };
  od.body = [](PieceContext& ctx) {
    const Params& p = ctx.params;
    uint64_t w = u(p, 0), d = u(p, 1), o = u(p, 3);
    ctx.data.read(order(w, d, o));
    for (uint64_t l = 1; l <= u(p, 4); ++l) ctx.data.read(order_line(w, d, o, l));
    return true;
  };
  proc.templates = {std::move(cu), std::move(od)};
  return proc;
}

// ---- Delivery: [w, carrier, n, (d, o, c, ol_cnt) * n] ----

uint32_t deliveries(const Params& p) {
  uint64_t n = u(p, 2);
  if (p.size() != 3 + 4 * n) fail(ErrorCode::kDecode, "malformed delivery params");
  return static_cast<uint32_t>(n);
}

StoredProcedure delivery_proc() {
  StoredProcedure proc;
  proc.function_id = kDeliveryProc;
  proc.name = "delivery";
  proc.min_params = 3;
  PieceTemplate dv;
  dv.name = "district";
  dv.instances = [](const Params& p) { return deliveries(p); };
  dv.keys = [](const Params& p, uint32_t i, KeySets& out) {
    uint64_t w = u(p, 0), d = u(p, 3 + 4 * i), o = u(p, 4 + 4 * i), c = u(p, 5 + 4 * i);
    out.writes.push_back(new_order(w, d, o));
    out.writes.push_back(order(w, d, o));
    for (uint64_t l = 1; l <= u(p, 6 + 4 * i); ++l) out.writes.push_back(order_line(w, d, o, l));
    out.writes.push_back(customer(w, d, c));
  };
  dv.body = [](PieceContext& ctx) {
    const Params& p = ctx.params;
    uint32_t i = ctx.instance;
    uint64_t w = u(p, 0), d = u(p, 3 + 4 * i), o = u(p, 4 + 4 * i), c = u(p, 5 + 4 * i);
    // An order that is not (yet) visible has nothing to deliver.
    if (!ctx.data.read(new_order(w, d, o))) return true;
    ctx.data.erase(new_order(w, d, o));
    if (auto r = ctx.data.read(order(w, d, o))) {
      (*r)[2] = num(p[1]);
      ctx.data.write(order(w, d, o), std::move(*r));
    }
    int64_t total = 0;
    for (uint64_t l = 1; l <= u(p, 6 + 4 * i); ++l) {
      if (auto r = ctx.data.read(order_line(w, d, o, l))) {
        total += col(*r, 3);
        (*r)[4] = num(static_cast<int64_t>(ctx.ts));
        ctx.data.write(order_line(w, d, o, l), std::move(*r));
      }
    }
    if (auto r = ctx.data.read(customer(w, d, c))) {
      (*r)[0] = num(col(*r, 0) + total);
      (*r)[3] = num(col(*r, 3) + 1);
      ctx.data.write(customer(w, d, c), std::move(*r));
    }
    return true;
  };
  proc.templates = {std::move(dv)};
  return proc;
}

// ---- StockLevel: [w, d, threshold, n, i * n] ----

uint32_t stock_items(const Params& p) {
  uint64_t n = u(p, 3);
  if (p.size() != 4 + n) fail(ErrorCode::kDecode, "malformed stock-level params");
  return static_cast<uint32_t>(n);
}

StoredProcedure stock_level_proc() {
  StoredProcedure proc;
  proc.function_id = kStockLevelProc;
  proc.name = "stock_level";
  proc.min_params = 4;
  PieceTemplate di;
  di.name = "district";
  di.keys = [](const Params& p, uint32_t, KeySets& out) {
    out.reads.push_back(district(u(p, 0), u(p, 1)));
  };
  di.body = [](PieceContext& ctx) {
    ctx.data.read(district(u(ctx.params, 0), u(ctx.params, 1)));
    return true;
  };
  PieceTemplate st;
  st.name = "stock";
  st.instances = [](const Params& p) { return stock_items(p); };
  st.keys = [](const Params& p, uint32_t i, KeySets& out) {
    out.reads.push_back(stock(u(p, 0), u(p, 4 + i)));
  };
  st.body = [](PieceContext& ctx) {
    ctx.data.read(stock(u(ctx.params, 0), u(ctx.params, 4 + ctx.instance)));
    return true;
  };
  proc.templates = {std::move(di), std::move(st)};
  return proc;
}

// The initial contents of order o in district (w, d).
struct InitialOrder {
  uint64_t c;
  std::vector<std::pair<uint64_t, int64_t>> lines;  // (item, qty)
};

InitialOrder initial_order(const TpccConfig& cfg, uint64_t w, uint64_t d, uint64_t o) {
  std::mt19937_64 rng(mix64(cfg.seed ^ mix64((w << 40) | (d << 32) | o)));
  InitialOrder io;
  io.c = (o - 1) % cfg.customers_per_district + 1;
  uint64_t n = uniform_int(rng, 5, 15);
  while (io.lines.size() < n) {
    uint64_t i = uniform_int(rng, 1, cfg.items);
    bool dup = std::any_of(io.lines.begin(), io.lines.end(), [&](auto& l) { return l.first == i; });
    if (!dup) io.lines.emplace_back(i, static_cast<int64_t>(uniform_int(rng, 1, 10)));
  }
  return io;
}

bool initially_pending(const TpccConfig& cfg, uint64_t o) {
  return o * 10 > static_cast<uint64_t>(cfg.initial_orders) * 7;
}

}  // namespace

const char* tpcc_type_name(TpccType t) noexcept {
  switch (t) {
    case TpccType::kNewOrder: return "new_order";
    case TpccType::kPayment: return "payment";
    case TpccType::kOrderStatus: return "order_status";
    case TpccType::kDelivery: return "delivery";
    case TpccType::kStockLevel: return "stock_level";
  }
  return "?";
}

void TpccConfig::validate() const {
  if (warehouses == 0) fail(ErrorCode::kUsage, "warehouses must be >= 1");
  double sum = 0;
  for (double m : mix) {
    if (!(m >= 0)) fail(ErrorCode::kUsage, "mix weights must be >= 0");
    sum += m;
  }
  if (std::abs(sum - 1.0) > 1e-6) fail(ErrorCode::kUsage, "mix weights must sum to 1");
  if (items < 15) fail(ErrorCode::kUsage, "tpcc needs at least 15 items");
  if (customers_per_district == 0) fail(ErrorCode::kUsage, "tpcc needs customers");
  if (!(invalid_item_rate >= 0 && invalid_item_rate <= 1)) {
    fail(ErrorCode::kUsage, "invalid item rate must be in [0, 1]");
  }
}

std::array<double, kTpccTypes> parse_tpcc_mix(const std::string& text) {
  std::array<double, kTpccTypes> mix{};
  std::stringstream ss(text);
  std::string part;
  size_t n = 0;
  while (std::getline(ss, part, ',')) {
    if (n == kTpccTypes) fail(ErrorCode::kUsage, "mix takes five weights");
    try {
      size_t used = 0;
      mix[n] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      fail(ErrorCode::kUsage, "bad mix weight '" + part + "'");
    }
    ++n;
  }
  if (n != kTpccTypes) fail(ErrorCode::kUsage, "mix takes five weights");
  double sum = 0;
  for (double m : mix) sum += m;
  if (std::abs(sum - 100.0) < 1e-6) {
    for (double& m : mix) m /= 100.0;
  }
  TpccConfig probe;
  probe.mix = mix;
  probe.validate();
  return mix;
}

void register_tpcc(ProcedureRegistry& registry) {
  registry.add(new_order_proc());
  registry.add(payment_proc());
  registry.add(order_status_proc());
  registry.add(delivery_proc());
  registry.add(stock_level_proc());
}

TpccWorkload::TpccWorkload(TpccConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  register_tpcc(registry_);
  c_id_ = uniform_int(rng_, 0, 1023);
  c_item_ = uniform_int(rng_, 0, 8191);
  districts_.resize(static_cast<size_t>(cfg_.warehouses) * kDistricts);
  last_orders_.resize(districts_.size() * cfg_.customers_per_district);
  for (uint64_t w = 1; w <= cfg_.warehouses; ++w) {
    for (uint64_t d = 1; d <= kDistricts; ++d) {
      dist(w, d).next_o_id = cfg_.initial_orders + 1;
      for (uint64_t o = 1; o <= cfg_.initial_orders; ++o) {
        InitialOrder io = initial_order(cfg_, w, d, o);
        std::vector<uint64_t> items;
        for (auto& l : io.lines) items.push_back(l.first);
        record_order(w, d, o, io.c, items, initially_pending(cfg_, o));
      }
    }
  }
}

void TpccWorkload::create_tables(Storage& storage) const {
  auto table = [&](TableId id, const char* name, std::vector<uint32_t> widths, uint32_t parts,
                   size_t capacity) {
    TableSchema s;
    s.id = id;
    s.name = name;
    s.column_widths = std::move(widths);
    s.key_width = 8 * parts;
    s.initial_capacity = std::max<size_t>(capacity, 16);
    storage.create_table(std::move(s));
  };
  size_t W = cfg_.warehouses;
  size_t C = W * kDistricts * cfg_.customers_per_district;
  size_t O = W * kDistricts * cfg_.initial_orders;
  table(kWarehouse, "warehouse", {24, 24, 16}, 1, W);
  table(kDistrict, "district", {24, 24, 24}, 2, W * kDistricts);
  table(kCustomer, "customer", {24, 24, 24, 24, 24, 64}, 3, C);
  table(kHistory, "history", {24, 24, 24, 24, 24}, 2, C);
  table(kItem, "item", {24, 24, 50}, 1, cfg_.items);
  table(kStock, "stock", {24, 24, 24, 24, 24}, 2, W * cfg_.items);
  table(kOrder, "orders", {24, 24, 24, 24}, 3, O * 2);
  table(kNewOrder, "new_order", {4}, 3, O);
  table(kOrderLine, "order_line", {24, 24, 24, 24, 24}, 4, O * 20);
}

void TpccWorkload::populate(Storage& storage) const {
  create_tables(storage);
  std::mt19937_64 rng(mix64(cfg_.seed + 17));
  std::vector<int64_t> prices(cfg_.items + 1);
  for (uint64_t i = 1; i <= cfg_.items; ++i) {
    prices[i] = static_cast<int64_t>(uniform_int(rng, 100, 10000));
    storage.insert(item(i), {num(prices[i]), "item" + std::to_string(i),
                             std::string(26 + i % 25, static_cast<char>('a' + i % 26))});
  }
  for (uint64_t w = 1; w <= cfg_.warehouses; ++w) {
    storage.insert(warehouse(w), {num(30000000), num(static_cast<int64_t>(uniform_int(rng, 0, 2000))),
                                  "wh" + std::to_string(w)});
    for (uint64_t i = 1; i <= cfg_.items; ++i) {
      storage.insert(stock(w, i), {num(static_cast<int64_t>(uniform_int(rng, 10, 100))), num(0), num(0),
                                   num(0), "dist" + std::to_string(i % 10)});
    }
    for (uint64_t d = 1; d <= kDistricts; ++d) {
      storage.insert(district(w, d), {num(3000000), num(static_cast<int64_t>(uniform_int(rng, 0, 2000))),
                                      num(cfg_.initial_orders + 1)});
      for (uint64_t c = 1; c <= cfg_.customers_per_district; ++c) {
        storage.insert(customer(w, d, c),
                       {num(-1000), num(1000), num(1), num(0),
                        num(static_cast<int64_t>(uniform_int(rng, 0, 5000))),
                        "cust" + std::to_string(c)});
      }
      for (uint64_t o = 1; o <= cfg_.initial_orders; ++o) {
        InitialOrder io = initial_order(cfg_, w, d, o);
        bool pending = initially_pending(cfg_, o);
        storage.insert(order(w, d, o), {num(static_cast<int64_t>(io.c)), num(0),
                                        num(pending ? 0 : static_cast<int64_t>(1 + o % 10)),
                                        num(static_cast<int64_t>(io.lines.size()))});
        if (pending) storage.insert(tpcc::new_order(w, d, o), {"1"});
        for (size_t l = 0; l < io.lines.size(); ++l) {
          auto [i, qty] = io.lines[l];
          storage.insert(order_line(w, d, o, l + 1),
                         {num(static_cast<int64_t>(i)), num(static_cast<int64_t>(w)), num(qty),
                          num(qty * prices[i]), num(pending ? 0 : 1)});
        }
      }
    }
  }
}

std::string TpccWorkload::procedure_name(FunctionId id) const {
  if (id >= kNewOrderProc && id <= kStockLevelProc) {
    return tpcc_type_name(static_cast<TpccType>(id - kNewOrderProc));
  }
  return "unknown";
}

TpccWorkload::DistrictState& TpccWorkload::dist(uint64_t w, uint64_t d) {
  return districts_[(w - 1) * kDistricts + (d - 1)];
}

TpccWorkload::LastOrder& TpccWorkload::last_order(uint64_t w, uint64_t d, uint64_t c) {
  return last_orders_[((w - 1) * kDistricts + (d - 1)) * cfg_.customers_per_district + (c - 1)];
}

uint64_t TpccWorkload::nurand(uint64_t a, uint64_t x, uint64_t y) {
  uint64_t c = a == 1023 ? c_id_ : c_item_;
  return (((uniform_int(rng_, 0, a) | uniform_int(rng_, x, y)) + c) % (y - x + 1)) + x;
}

uint64_t TpccWorkload::pick_customer() { return nurand(1023, 1, cfg_.customers_per_district); }
uint64_t TpccWorkload::pick_item() { return nurand(8191, 1, cfg_.items); }

void TpccWorkload::record_order(uint64_t w, uint64_t d, uint64_t o, uint64_t c,
                                const std::vector<uint64_t>& items, bool pending) {
  DistrictState& ds = dist(w, d);
  ds.recent_items.push_back(items);
  if (ds.recent_items.size() > 20) ds.recent_items.pop_front();
  if (pending) ds.undelivered.push_back({o, c, static_cast<uint32_t>(items.size())});
  last_order(w, d, c) = {o, static_cast<uint32_t>(items.size())};
}

TpccType TpccWorkload::draw_type() {
  double x = uniform01(rng_);
  double acc = 0;
  for (size_t t = 0; t < kTpccTypes; ++t) {
    acc += cfg_.mix[t];
    if (x < acc) return static_cast<TpccType>(t);
  }
  for (size_t t = kTpccTypes; t-- > 0;) {
    if (cfg_.mix[t] > 0) return static_cast<TpccType>(t);
  }
  return TpccType::kNewOrder;
}

Transaction TpccWorkload::new_order() {
  uint64_t w = uniform_int(rng_, 1, cfg_.warehouses);
  uint64_t d = uniform_int(rng_, 1, kDistricts);
  uint64_t c = pick_customer();
  uint64_t n = uniform_int(rng_, 5, 15);
  bool invalid = uniform01(rng_) < cfg_.invalid_item_rate;
  DistrictState& ds = dist(w, d);
  uint64_t o = ds.next_o_id++;
  Params p{static_cast<int64_t>(w), static_cast<int64_t>(d), static_cast<int64_t>(c),
           static_cast<int64_t>(o), static_cast<int64_t>(n)};
  std::vector<uint64_t> items;
  while (items.size() < n) {
    uint64_t i = pick_item();
    if (std::find(items.begin(), items.end(), i) != items.end()) continue;
    items.push_back(i);
  }
  if (invalid) items.back() = cfg_.items + 1;
  for (uint64_t i : items) {
    uint64_t sw = w;
    if (cfg_.warehouses > 1 && uniform01(rng_) < 0.01) {
      do {
        sw = uniform_int(rng_, 1, cfg_.warehouses);
      } while (sw == w);
    }
    p.push_back(static_cast<int64_t>(i));
    p.push_back(static_cast<int64_t>(sw));
    p.push_back(static_cast<int64_t>(uniform_int(rng_, 1, 10)));
  }
  if (invalid) {
    ++invalid_;
  } else {
    record_order(w, d, o, c, items, true);
  }
  return Transaction{0, kNewOrderProc, encode_params(p), {}};
}

Transaction TpccWorkload::payment() {
  uint64_t w = uniform_int(rng_, 1, cfg_.warehouses);
  uint64_t d = uniform_int(rng_, 1, kDistricts);
  uint64_t cw = w, cd = d;
  if (cfg_.warehouses > 1 && uniform01(rng_) < 0.15) {
    do {
      cw = uniform_int(rng_, 1, cfg_.warehouses);
    } while (cw == w);
    cd = uniform_int(rng_, 1, kDistricts);
  }
  uint64_t c = pick_customer();
  int64_t amount = static_cast<int64_t>(uniform_int(rng_, 100, 500000));
  Params p{static_cast<int64_t>(w),  static_cast<int64_t>(d), static_cast<int64_t>(cw),
           static_cast<int64_t>(cd), static_cast<int64_t>(c), amount,
           static_cast<int64_t>(next_history_++)};
  return Transaction{0, kPaymentProc, encode_params(p), {}};
}

Transaction TpccWorkload::order_status() {
  uint64_t w = uniform_int(rng_, 1, cfg_.warehouses);
  uint64_t d = uniform_int(rng_, 1, kDistricts);
  uint64_t c = pick_customer();
  LastOrder lo = last_order(w, d, c);
  Params p{static_cast<int64_t>(w), static_cast<int64_t>(d), static_cast<int64_t>(c),
           static_cast<int64_t>(lo.o_id), static_cast<int64_t>(lo.ol_cnt)};
  return Transaction{0, kOrderStatusProc, encode_params(p), {}};
}

Transaction TpccWorkload::delivery() {
  uint64_t w = uniform_int(rng_, 1, cfg_.warehouses);
  uint64_t carrier = uniform_int(rng_, 1, 10);
  Params p{static_cast<int64_t>(w), static_cast<int64_t>(carrier), 0};
  for (uint64_t d = 1; d <= kDistricts; ++d) {
    DistrictState& ds = dist(w, d);
    if (ds.undelivered.empty()) continue;
    PendingOrder po = ds.undelivered.front();
    ds.undelivered.pop_front();
    p.push_back(static_cast<int64_t>(d));
    p.push_back(static_cast<int64_t>(po.o_id));
    p.push_back(static_cast<int64_t>(po.c_id));
    p.push_back(static_cast<int64_t>(po.ol_cnt));
    ++p[2];
  }
  return Transaction{0, kDeliveryProc, encode_params(p), {}};
}

Transaction TpccWorkload::stock_level() {
  uint64_t w = uniform_int(rng_, 1, cfg_.warehouses);
  uint64_t d = uniform_int(rng_, 1, kDistricts);
  uint64_t threshold = uniform_int(rng_, 10, 20);
  std::vector<uint64_t> items;
  for (const auto& o : dist(w, d).recent_items) items.insert(items.end(), o.begin(), o.end());
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  items.erase(std::remove_if(items.begin(), items.end(), [&](uint64_t i) { return i > cfg_.items; }),
              items.end());
  Params p{static_cast<int64_t>(w), static_cast<int64_t>(d), static_cast<int64_t>(threshold),
           static_cast<int64_t>(items.size())};
  for (uint64_t i : items) p.push_back(static_cast<int64_t>(i));
  return Transaction{0, kStockLevelProc, encode_params(p), {}};
}

Transaction TpccWorkload::next() {
  // An empty delivery is redrawn unless the mix has nothing else to draw.
  bool redraw = false;
  for (size_t t = 0; t < kTpccTypes; ++t) {
    redraw = redraw || (t != static_cast<size_t>(TpccType::kDelivery) && cfg_.mix[t] > 0);
  }
  for (;;) {
    TpccType t = draw_type();
    if (t == TpccType::kDelivery && redraw) {
      bool any = false;
      for (uint64_t i = 0; i < districts_.size() && !any; ++i) any = !districts_[i].undelivered.empty();
      if (!any) continue;
    }
    Transaction txn;
    switch (t) {
      case TpccType::kNewOrder: txn = new_order(); break;
      case TpccType::kPayment: txn = payment(); break;
      case TpccType::kOrderStatus: txn = order_status(); break;
      case TpccType::kDelivery: txn = delivery(); break;
      case TpccType::kStockLevel: txn = stock_level(); break;
    }
    if (t == TpccType::kDelivery && redraw && decode_params(txn.params)[2] == 0) continue;
    ++generated_[static_cast<size_t>(t)];
    last_ = t;
    return txn;
  }
}

}  // namespace dgcc
