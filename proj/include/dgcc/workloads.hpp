#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dgcc/storage.hpp"
#include "dgcc/txmodel.hpp"

namespace dgcc {

// Uniform double in [0, 1) from the top 53 bits; portable across libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
// Uniform integer in [lo, hi].
uint64_t uniform_int(std::mt19937_64& rng, uint64_t lo, uint64_t hi);

// P(rank r) proportional to 1/r^theta over [1, n], sampled by
// rejection-inversion. theta = 0 is uniform.
class ZipfSampler {
 public:
  ZipfSampler(uint64_t n, double theta);
  uint64_t operator()(std::mt19937_64& rng) const;
  uint64_t n() const noexcept { return n_; }
  double theta() const noexcept { return theta_; }

 private:
  double h(double x) const;
  double h_integral(double x) const;
  double h_integral_inverse(double x) const;

  uint64_t n_;
  double theta_;
  double h_integral_x1_ = 0;
  double h_integral_n_ = 0;
  double s_ = 0;
};

// Exact pmf by direct normalization over all n ranks.
double zipf_pmf(uint64_t n, double theta, uint64_t rank);

enum class WorkloadKind { kYcsb, kTpcc };

// A populated schema plus a deterministic transaction stream.
class Workload {
 public:
  virtual ~Workload() = default;
  virtual WorkloadKind kind() const noexcept = 0;
  virtual const ProcedureRegistry& registry() const noexcept = 0;
  // Creates the tables and loads the initial rows.
  virtual void populate(Storage& storage) const = 0;
  // Creates the tables only.
  virtual void create_tables(Storage& storage) const = 0;
  // Next transaction, ts = 0.
  virtual Transaction next() = 0;
  // Short name of a procedure, for reports.
  virtual std::string procedure_name(FunctionId id) const = 0;
};

// ---- YCSB ----

inline constexpr TableId kYcsbTable = 10;
inline constexpr FunctionId kYcsbProc = 1;
inline constexpr size_t kYcsbFields = 10;
inline constexpr size_t kYcsbFieldBytes = 100;

struct YcsbConfig {
  double theta = 0.8;
  double rw_ratio = 1.0;  // reads per write
  uint64_t table_size = 100000;
  uint32_t ops_per_txn = 16;
  uint64_t seed = 1;

  // Throws Error(kUsage).
  void validate() const;
};

// Params: [n, (key, is_write) * n]. One single-key piece per op; writes are
// read-modify-writes.
StoredProcedure ycsb_procedure();
Record ycsb_initial_record(uint64_t key);

class YcsbWorkload final : public Workload {
 public:
  explicit YcsbWorkload(YcsbConfig cfg);
  WorkloadKind kind() const noexcept override { return WorkloadKind::kYcsb; }
  const ProcedureRegistry& registry() const noexcept override { return registry_; }
  void populate(Storage& storage) const override;
  void create_tables(Storage& storage) const override;
  Transaction next() override;
  std::string procedure_name(FunctionId) const override { return "ycsb"; }
  const YcsbConfig& config() const noexcept { return cfg_; }

 private:
  YcsbConfig cfg_;
  ProcedureRegistry registry_;
  ZipfSampler zipf_;
  std::mt19937_64 rng_;
};

// ---- TPC-C subset ----

namespace tpcc {
inline constexpr TableId kWarehouse = 20;
inline constexpr TableId kDistrict = 21;
inline constexpr TableId kCustomer = 22;
inline constexpr TableId kHistory = 23;
inline constexpr TableId kItem = 24;
inline constexpr TableId kStock = 25;
inline constexpr TableId kOrder = 26;
inline constexpr TableId kNewOrder = 27;
inline constexpr TableId kOrderLine = 28;

inline constexpr FunctionId kNewOrderProc = 11;
inline constexpr FunctionId kPaymentProc = 12;
inline constexpr FunctionId kOrderStatusProc = 13;
inline constexpr FunctionId kDeliveryProc = 14;
inline constexpr FunctionId kStockLevelProc = 15;

inline constexpr uint32_t kDistricts = 10;

Key warehouse(uint64_t w);
Key district(uint64_t w, uint64_t d);
Key customer(uint64_t w, uint64_t d, uint64_t c);
Key history(uint64_t w, uint64_t h);
Key item(uint64_t i);
Key stock(uint64_t w, uint64_t i);
Key order(uint64_t w, uint64_t d, uint64_t o);
Key new_order(uint64_t w, uint64_t d, uint64_t o);
Key order_line(uint64_t w, uint64_t d, uint64_t o, uint64_t ol);
}  // namespace tpcc

enum class TpccType : uint8_t { kNewOrder, kPayment, kOrderStatus, kDelivery, kStockLevel };
inline constexpr size_t kTpccTypes = 5;
const char* tpcc_type_name(TpccType t) noexcept;

struct TpccConfig {
  uint32_t warehouses = 1;
  // NewOrder, Payment, OrderStatus, Delivery, StockLevel.
  std::array<double, kTpccTypes> mix{0.45, 0.43, 0.04, 0.04, 0.04};
  uint32_t items = 100000;
  uint32_t customers_per_district = 3000;
  // Orders loaded per district; the newest 30% stay undelivered.
  uint32_t initial_orders = 30;
  // Fraction of NewOrders naming an unknown item.
  double invalid_item_rate = 0.01;
  uint64_t seed = 1;

  void validate() const;
};

// Parses "a,b,c,d,e" as fractions or percentages. Throws Error(kUsage).
std::array<double, kTpccTypes> parse_tpcc_mix(const std::string& text);

void register_tpcc(ProcedureRegistry& registry);

class TpccWorkload final : public Workload {
 public:
  explicit TpccWorkload(TpccConfig cfg);
  WorkloadKind kind() const noexcept override { return WorkloadKind::kTpcc; }
  const ProcedureRegistry& registry() const noexcept override { return registry_; }
  void populate(Storage& storage) const override;
  void create_tables(Storage& storage) const override;
  Transaction next() override;
  std::string procedure_name(FunctionId id) const override;
  const TpccConfig& config() const noexcept { return cfg_; }

  // Generated so far, per type.
  const std::array<uint64_t, kTpccTypes>& generated() const noexcept { return generated_; }
  uint64_t invalid_new_orders() const noexcept { return invalid_; }
  TpccType last_type() const noexcept { return last_; }

 private:
  struct PendingOrder {
    uint64_t o_id;
    uint64_t c_id;
    uint32_t ol_cnt;
  };
  struct DistrictState {
    uint64_t next_o_id = 1;
    std::deque<PendingOrder> undelivered;
    std::deque<std::vector<uint64_t>> recent_items;  // last 20 orders
  };
  struct LastOrder {
    uint64_t o_id = 0;
    uint32_t ol_cnt = 0;
  };

  TpccType draw_type();
  Transaction new_order();
  Transaction payment();
  Transaction order_status();
  Transaction delivery();
  Transaction stock_level();
  DistrictState& dist(uint64_t w, uint64_t d);
  LastOrder& last_order(uint64_t w, uint64_t d, uint64_t c);
  uint64_t nurand(uint64_t a, uint64_t x, uint64_t y);
  uint64_t pick_customer();
  uint64_t pick_item();
  void record_order(uint64_t w, uint64_t d, uint64_t o, uint64_t c,
                    const std::vector<uint64_t>& items, bool pending);

  TpccConfig cfg_;
  ProcedureRegistry registry_;
  std::mt19937_64 rng_;
  std::vector<DistrictState> districts_;
  std::vector<LastOrder> last_orders_;
  uint64_t next_history_ = 1;
  uint64_t c_id_, c_item_;  // NURand run-time constants
  std::array<uint64_t, kTpccTypes> generated_{};
  uint64_t invalid_ = 0;
  TpccType last_ = TpccType::kNewOrder;
};

// Decimal column helpers shared by workload bodies.
std::string num(int64_t v);
int64_t to_num(const std::string& s);

}  // namespace dgcc
