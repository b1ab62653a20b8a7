#include "dgcc/dgcc.h"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <map>
#include <new>
#include <sstream>

#include "dgcc/bench.hpp"
#include "dgcc/error.hpp"

struct dgcc_config {
  dgcc::RunConfig cfg;
};

struct dgcc_report {
  std::vector<dgcc::EngineReport> runs;
};

namespace {

thread_local std::string last_error;

dgcc_status set_error(dgcc_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

dgcc_status from_code(dgcc::ErrorCode c) {
  switch (c) {
    case dgcc::ErrorCode::kUsage: return DGCC_E_USAGE;
    case dgcc::ErrorCode::kDurability: return DGCC_E_DURABILITY;
    case dgcc::ErrorCode::kIo: return DGCC_E_IO;
    default: return DGCC_E_INTERNAL;
  }
}

// Runs f, converting every exception into a status.
template <typename F>
dgcc_status guarded(F&& f) {
  try {
    last_error.clear();
    return f();
  } catch (const dgcc::Error& e) {
    return set_error(from_code(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(DGCC_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(DGCC_E_INTERNAL, e.what());
  }
}

void bad_value(const std::string& key, const std::string& value) {
  dgcc::fail(dgcc::ErrorCode::kUsage, "invalid value '" + value + "' for " + key);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) bad_value(key, v);
  return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_value(key, v);
  return false;
}

using Setter = std::function<void(dgcc::RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  using dgcc::RunConfig;
  static const std::map<std::string, Setter> m{
      {"protocol",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         auto p = dgcc::parse_protocol(v);
         if (!p) bad_value(k, v);
         c.protocol = *p;
       }},
      {"workload",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "ycsb") {
           c.workload = dgcc::WorkloadKind::kYcsb;
         } else if (v == "tpcc") {
           c.workload = dgcc::WorkloadKind::kTpcc;
         } else {
           bad_value(k, v);
         }
       }},
      {"threads", [](RunConfig& c, auto& k, auto& v) { c.threads = parse_int<uint32_t>(k, v); }},
      {"max-batch", [](RunConfig& c, auto& k, auto& v) { c.max_batch = parse_int<uint32_t>(k, v); }},
      {"constructors", [](RunConfig& c, auto& k, auto& v) { c.constructors = parse_int<uint32_t>(k, v); }},
      {"theta", [](RunConfig& c, auto& k, auto& v) { c.theta = parse_real(k, v); }},
      {"rw-ratio", [](RunConfig& c, auto& k, auto& v) { c.rw_ratio = parse_real(k, v); }},
      {"ops-per-txn", [](RunConfig& c, auto& k, auto& v) { c.ops_per_txn = parse_int<uint32_t>(k, v); }},
      {"table-size", [](RunConfig& c, auto& k, auto& v) { c.table_size = parse_int<uint64_t>(k, v); }},
      {"warehouses", [](RunConfig& c, auto& k, auto& v) { c.warehouses = parse_int<uint32_t>(k, v); }},
      {"items", [](RunConfig& c, auto& k, auto& v) { c.items = parse_int<uint32_t>(k, v); }},
      {"mix",
       [](RunConfig& c, auto&, auto& v) {
         dgcc::parse_tpcc_mix(v);
         c.mix = v;
       }},
      {"duration", [](RunConfig& c, auto& k, auto& v) { c.duration_s = parse_real(k, v); }},
      {"txns", [](RunConfig& c, auto& k, auto& v) { c.txns = parse_int<uint64_t>(k, v); }},
      {"warmup", [](RunConfig& c, auto& k, auto& v) { c.warmup_s = parse_real(k, v); }},
      {"warmup-txns", [](RunConfig& c, auto& k, auto& v) { c.warmup_txns = parse_int<uint64_t>(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.seed = parse_int<uint64_t>(k, v); }},
      {"arrival-rate", [](RunConfig& c, auto& k, auto& v) { c.arrival_rate = parse_real(k, v); }},
      {"log-dir",
       [](RunConfig& c, auto& k, auto& v) {
         if (v.empty()) bad_value(k, v);
         c.log_dir = std::filesystem::path(v);
       }},
      {"checkpoint-interval",
       [](RunConfig& c, auto& k, auto& v) { c.checkpoint_interval = parse_int<uint64_t>(k, v); }},
      {"sections", [](RunConfig& c, auto& k, auto& v) { c.sections = parse_int<uint32_t>(k, v); }},
      {"audit", [](RunConfig& c, auto& k, auto& v) { c.audit = parse_bool(k, v); }},
  };
  return m;
}

const dgcc::EngineReport* run_at(const dgcc_report* r, size_t i) {
  if (!r || i >= r->runs.size()) return nullptr;
  return &r->runs[i];
}

}  // namespace

extern "C" {

const char* dgcc_version(void) { return "1.0.0"; }

const char* dgcc_status_name(dgcc_status s) {
  switch (s) {
    case DGCC_OK: return "ok";
    case DGCC_E_ARGUMENT: return "argument";
    case DGCC_E_USAGE: return "usage";
    case DGCC_E_DURABILITY: return "durability";
    case DGCC_E_IO: return "io";
    case DGCC_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* dgcc_last_error(void) { return last_error.c_str(); }

dgcc_status dgcc_config_create(dgcc_config** out) {
  if (!out) return set_error(DGCC_E_ARGUMENT, "null output pointer");
  return guarded([&] {
    *out = new dgcc_config();
    return DGCC_OK;
  });
}

void dgcc_config_destroy(dgcc_config* config) { delete config; }

dgcc_status dgcc_config_set(dgcc_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return set_error(DGCC_E_ARGUMENT, "null argument");
  return guarded([&] {
    auto it = setters().find(key);
    if (it == setters().end()) return set_error(DGCC_E_ARGUMENT, std::string("unknown key ") + key);
    it->second(config->cfg, key, value);
    return DGCC_OK;
  });
}

dgcc_status dgcc_config_validate(const dgcc_config* config) {
  if (!config) return set_error(DGCC_E_ARGUMENT, "null config");
  return guarded([&] {
    config->cfg.validate();
    return DGCC_OK;
  });
}

dgcc_status dgcc_run(const dgcc_config* config, dgcc_report** out) {
  if (!config || !out) return set_error(DGCC_E_ARGUMENT, "null argument");
  return guarded([&] {
    auto r = std::make_unique<dgcc_report>();
    r->runs.push_back(dgcc::run_benchmark(config->cfg));
    *out = r.release();
    return DGCC_OK;
  });
}

dgcc_status dgcc_sweep(const dgcc_config* config, const char* axis, const double* values, size_t count,
                       const char* protocols, dgcc_report** out) {
  if (!config || !axis || !out || (count > 0 && !values)) return set_error(DGCC_E_ARGUMENT, "null argument");
  return guarded([&] {
    auto a = dgcc::parse_sweep_axis(axis);
    if (!a) return set_error(DGCC_E_USAGE, std::string("unknown sweep axis ") + axis);
    std::vector<dgcc::Protocol> protos;
    if (protocols && *protocols) {
      std::stringstream ss(protocols);
      for (std::string item; std::getline(ss, item, ',');) {
        auto p = dgcc::parse_protocol(item);
        if (!p) return set_error(DGCC_E_USAGE, "unknown protocol " + item);
        protos.push_back(*p);
      }
    } else {
      protos.push_back(config->cfg.protocol);
    }
    for (size_t i = 0; i < count; ++i) {
      for (dgcc::Protocol p : protos) {
        dgcc::RunConfig c = dgcc::with_axis(config->cfg, *a, values[i]);
        c.protocol = p;
        c.validate();
      }
    }
    auto r = std::make_unique<dgcc_report>();
    r->runs = dgcc::sweep(config->cfg, *a, std::span<const double>(values, count), protos);
    *out = r.release();
    return DGCC_OK;
  });
}

size_t dgcc_report_runs(const dgcc_report* report) { return report ? report->runs.size() : 0; }

dgcc_status dgcc_report_u64(const dgcc_report* report, size_t run, const char* field, uint64_t* out) {
  const dgcc::EngineReport* r = run_at(report, run);
  if (!r || !field || !out) return set_error(DGCC_E_ARGUMENT, "bad report, run index or field");
  const std::map<std::string, uint64_t> fields{
      {"submitted", r->submitted},
      {"committed", r->committed},
      {"final_aborts", r->final_aborts},
      {"graphs", r->graphs},
      {"log_flushes", r->log_flushes},
      {"log_bytes", r->log_bytes},
      {"checkpoints", r->checkpoints},
      {"run_transactions", r->run_transactions},
      {"aborts.deadlock", r->aborts.deadlock},
      {"aborts.validation", r->aborts.validation},
      {"aborts.write_conflict", r->aborts.write_conflict},
      {"aborts.condition_check", r->aborts.condition_check},
      {"audit.serializable", r->audit ? uint64_t{r->audit->serializable} : uint64_t{1}},
      {"audit.write_skew", r->audit ? uint64_t{r->audit->write_skew} : uint64_t{0}},
      {"audit.passed",
       uint64_t{!r->audit || r->audit->serializable ||
                (r->config.protocol == dgcc::Protocol::kMvcc && r->audit->write_skew)}},
      {"accounting_closed", uint64_t{r->accounting_closed()}},
  };
  auto it = fields.find(field);
  if (it == fields.end()) return set_error(DGCC_E_ARGUMENT, std::string("unknown field ") + field);
  *out = it->second;
  return DGCC_OK;
}

dgcc_status dgcc_report_double(const dgcc_report* report, size_t run, const char* field, double* out) {
  const dgcc::EngineReport* r = run_at(report, run);
  if (!r || !field || !out) return set_error(DGCC_E_ARGUMENT, "bad report, run index or field");
  const std::map<std::string, double> fields{
      {"throughput", r->throughput},
      {"measured_s", r->measured_s},
      {"mean_batch_size", r->mean_batch_size},
      {"latency.mean_us", r->latency.mean_us},
      {"latency.p50_us", r->latency.p50_us},
      {"latency.p95_us", r->latency.p95_us},
      {"latency.p99_us", r->latency.p99_us},
      {"latency.max_us", r->latency.max_us},
  };
  auto it = fields.find(field);
  if (it == fields.end()) return set_error(DGCC_E_ARGUMENT, std::string("unknown field ") + field);
  *out = it->second;
  return DGCC_OK;
}

dgcc_status dgcc_report_format(const dgcc_report* report, const char* format, char** out) {
  if (!report || !format || !out) return set_error(DGCC_E_ARGUMENT, "null argument");
  return guarded([&] {
    auto f = dgcc::parse_report_format(format);
    if (!f) return set_error(DGCC_E_USAGE, std::string("unknown format ") + format);
    std::string s = dgcc::format_reports(report->runs, *f);
    char* buf = static_cast<char*>(std::malloc(s.size() + 1));
    if (!buf) return set_error(DGCC_E_INTERNAL, "out of memory");
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
    return DGCC_OK;
  });
}

void dgcc_report_destroy(dgcc_report* report) { delete report; }

void dgcc_string_free(char* s) { std::free(s); }

}  // extern "C"
