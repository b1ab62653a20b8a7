#include "dgcc/storage.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include "dgcc/codec.hpp"
#include "dgcc/error.hpp"

namespace dgcc {

Key Key::of(TableId table, std::initializer_list<uint64_t> parts) {
  Key k;
  k.table = table;
  k.primary.reserve(parts.size() * 8);
  for (uint64_t p : parts) {
    for (int i = 7; i >= 0; --i) k.primary.push_back(static_cast<char>((p >> (8 * i)) & 0xff));
  }
  return k;
}

std::string Key::to_string() const {
  std::string out = std::to_string(table) + ":";
  if (primary.size() % 8 == 0 && !primary.empty()) {
    for (size_t off = 0; off < primary.size(); off += 8) {
      uint64_t v = 0;
      for (size_t i = 0; i < 8; ++i) v = (v << 8) | static_cast<uint8_t>(primary[off + i]);
      if (off) out += ".";
      out += std::to_string(v);
    }
    return out;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  for (unsigned char c : primary) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 15]);
  }
  return out;
}

size_t KeyHash::operator()(const Key& k) const noexcept {
  // FNV-1a over table id and primary bytes.
  uint64_t h = 14695981039346656037ull;
  auto mix = [&](unsigned char c) {
    h ^= c;
    h *= 1099511628211ull;
  };
  mix(static_cast<unsigned char>(k.table & 0xff));
  mix(static_cast<unsigned char>(k.table >> 8));
  for (unsigned char c : k.primary) mix(c);
  return static_cast<size_t>(h ^ (h >> 29));
}

namespace {

struct Slot {
  Record record;
  std::vector<Version> versions;  // newest first
  uint64_t stamp = 0;
  bool live = false;
  bool indexed = false;
  mutable std::mutex latch;
};

// Slab allocator; slabs never move so Slot pointers are stable.
class RecordPool {
 public:
  explicit RecordPool(size_t initial) : next_slab_size_(std::max<size_t>(initial, 1)) {}

  Slot* allocate() {
    std::lock_guard lk(mu_);
    if (free_.empty()) grow();
    Slot* s = free_.back();
    free_.pop_back();
    return s;
  }

  void retire(Slot* s) {
    std::lock_guard lk(mu_);
    pending_.push_back(s);
  }

  size_t release_pending() {
    std::lock_guard lk(mu_);
    size_t n = pending_.size();
    for (Slot* s : pending_) {
      s->record.clear();
      s->versions.clear();
      s->live = false;
      s->indexed = false;
      free_.push_back(s);
    }
    pending_.clear();
    return n;
  }

  PoolStats stats() const {
    std::lock_guard lk(mu_);
    PoolStats st;
    st.slabs = slabs_.size();
    st.capacity = capacity_;
    st.free = free_.size();
    st.pending = pending_.size();
    return st;
  }

 private:
  void grow() {
    size_t n = next_slab_size_;
    slabs_.push_back(std::make_unique<Slot[]>(n));
    Slot* base = slabs_.back().get();
    for (size_t i = n; i-- > 0;) free_.push_back(base + i);
    capacity_ += n;
    next_slab_size_ = capacity_;
  }

  mutable std::mutex mu_;
  std::vector<std::unique_ptr<Slot[]>> slabs_;
  std::vector<Slot*> free_;
  std::vector<Slot*> pending_;
  size_t capacity_ = 0;
  size_t next_slab_size_;
};

struct Shard {
  mutable std::shared_mutex mu;
  std::unordered_map<std::string, Slot*> map;
};

size_t shard_of(std::string_view primary) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : primary) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return static_cast<size_t>((h ^ (h >> 32)) % Storage::kShards);
}

const Version* newest_committed(const Slot& s) {
  for (const auto& v : s.versions) {
    if (v.committed) return &v;
  }
  return nullptr;
}

// The visible record of a slot, independent of storage mode.
const Record* visible(const Slot& s, StorageMode mode) {
  if (mode == StorageMode::kSingleVersion) return s.live ? &s.record : nullptr;
  const Version* v = newest_committed(s);
  return v && v->record ? &*v->record : nullptr;
}

}  // namespace

class Table {
 public:
  Table(TableSchema schema, StorageMode mode)
      : schema_(std::move(schema)), mode_(mode), pool_(schema_.initial_capacity) {}

  const TableSchema& schema() const { return schema_; }

  void validate_key(const Key& k) const {
    if (schema_.key_width != 0 && k.primary.size() != schema_.key_width) {
      fail(ErrorCode::kSchema, "key " + k.to_string() + " has width " +
                                   std::to_string(k.primary.size()) + ", table " +
                                   schema_.name + " expects " + std::to_string(schema_.key_width));
    }
  }

  void validate(const Record& r) const {
    if (r.size() != schema_.column_widths.size()) {
      fail(ErrorCode::kSchema, "record has " + std::to_string(r.size()) + " columns, table " +
                                   schema_.name + " expects " +
                                   std::to_string(schema_.column_widths.size()));
    }
    for (size_t i = 0; i < r.size(); ++i) {
      if (r[i].size() > schema_.column_widths[i]) {
        fail(ErrorCode::kSchema, "column " + std::to_string(i) + " of table " + schema_.name +
                                     " exceeds width " + std::to_string(schema_.column_widths[i]));
      }
    }
  }

  Slot* find(const std::string& primary) const {
    const Shard& sh = shards_[shard_of(primary)];
    std::shared_lock lk(sh.mu);
    auto it = sh.map.find(primary);
    return it == sh.map.end() ? nullptr : it->second;
  }

  // Returns the indexed slot, creating a non-live one when absent.
  Slot* find_or_create(const std::string& primary) {
    Shard& sh = shards_[shard_of(primary)];
    {
      std::shared_lock lk(sh.mu);
      auto it = sh.map.find(primary);
      if (it != sh.map.end()) return it->second;
    }
    std::unique_lock lk(sh.mu);
    auto it = sh.map.find(primary);
    if (it != sh.map.end()) return it->second;
    Slot* s = pool_.allocate();
    s->indexed = true;
    s->live = false;
    sh.map.emplace(primary, s);
    indexed_.fetch_add(1, std::memory_order_relaxed);
    return s;
  }

  void mark_live(Slot* s) {
    if (!s->live) {
      s->live = true;
      live_.fetch_add(1, std::memory_order_relaxed);
    }
  }

  void mark_dead(Slot* s) {
    if (s->live) {
      s->live = false;
      live_.fetch_sub(1, std::memory_order_relaxed);
    }
  }

  size_t compact() {
    for (auto& sh : shards_) {
      std::unique_lock lk(sh.mu);
      for (auto it = sh.map.begin(); it != sh.map.end();) {
        Slot* s = it->second;
        bool dead = mode_ == StorageMode::kSingleVersion ? !s->live : s->versions.empty();
        if (dead) {
          pool_.retire(s);
          it = sh.map.erase(it);
          indexed_.fetch_sub(1, std::memory_order_relaxed);
        } else {
          ++it;
        }
      }
    }
    return pool_.release_pending();
  }

  size_t live() const { return live_.load(std::memory_order_relaxed); }
  PoolStats stats() const {
    PoolStats st = pool_.stats();
    st.live = live();
    st.pending += indexed_.load(std::memory_order_relaxed) - st.live;
    return st;
  }

  template <class Fn>
  void for_each_shard(size_t shard, Fn&& fn) const {
    const Shard& sh = shards_[shard];
    std::shared_lock lk(sh.mu);
    for (const auto& [primary, slot] : sh.map) fn(primary, *slot);
  }

  std::unique_ptr<Table> clone() const {
    auto t = std::make_unique<Table>(schema_, mode_);
    for (size_t i = 0; i < Storage::kShards; ++i) {
      for_each_shard(i, [&](const std::string& primary, const Slot& s) {
        bool keep = mode_ == StorageMode::kSingleVersion ? s.live : !s.versions.empty();
        if (!keep) return;
        Slot* d = t->find_or_create(primary);
        d->record = s.record;
        d->versions = s.versions;
        d->stamp = s.stamp;
        if (s.live) t->mark_live(d);
      });
    }
    return t;
  }

 private:
  TableSchema schema_;
  StorageMode mode_;
  RecordPool pool_;
  std::array<Shard, Storage::kShards> shards_;
  std::atomic<size_t> live_{0};
  std::atomic<size_t> indexed_{0};
};

Storage::Storage(StorageMode mode)
    : mode_(mode), stamp_clock_(std::make_unique<std::atomic<uint64_t>>(0)) {}
Storage::~Storage() = default;
Storage::Storage(Storage&&) noexcept = default;
Storage& Storage::operator=(Storage&&) noexcept = default;

void Storage::create_table(TableSchema schema) {
  TableId id = schema.id;
  if (id < tables_.size() && tables_[id]) {
    fail(ErrorCode::kSchema, "table " + std::to_string(id) + " already exists");
  }
  if (schema.column_widths.empty()) fail(ErrorCode::kSchema, "table schema needs columns");
  if (id >= tables_.size()) tables_.resize(id + 1);
  tables_[id] = std::make_unique<Table>(std::move(schema), mode_);
}

bool Storage::has_table(TableId id) const noexcept {
  return id < tables_.size() && tables_[id] != nullptr;
}

Table& Storage::table(TableId id) const {
  if (!has_table(id)) fail(ErrorCode::kSchema, "unknown table_id " + std::to_string(id));
  return *tables_[id];
}

const TableSchema& Storage::schema(TableId id) const { return table(id).schema(); }

std::vector<TableId> Storage::table_ids() const {
  std::vector<TableId> ids;
  for (size_t i = 0; i < tables_.size(); ++i) {
    if (tables_[i]) ids.push_back(static_cast<TableId>(i));
  }
  return ids;
}

std::optional<Record> Storage::get(const Key& key) const {
  Table& t = table(key.table);
  Slot* s = t.find(key.primary);
  if (!s) return std::nullopt;
  if (mode_ == StorageMode::kMultiVersion) {
    std::lock_guard lk(s->latch);
    const Record* r = visible(*s, mode_);
    return r ? std::optional<Record>(*r) : std::nullopt;
  }
  if (!s->live) return std::nullopt;
  return s->record;
}

bool Storage::contains(const Key& key) const {
  Table& t = table(key.table);
  Slot* s = t.find(key.primary);
  if (!s) return false;
  if (mode_ == StorageMode::kMultiVersion) {
    std::lock_guard lk(s->latch);
    return visible(*s, mode_) != nullptr;
  }
  return s->live;
}

void Storage::put(const Key& key, Record record) {
  Table& t = table(key.table);
  t.validate_key(key);
  t.validate(record);
  Slot* s = t.find_or_create(key.primary);
  if (mode_ == StorageMode::kMultiVersion) {
    std::lock_guard lk(s->latch);
    for (const auto& v : s->versions) {
      if (v.ts != 0) {
        fail(ErrorCode::kSchema, "put on a versioned record with history; use mv_install");
      }
    }
    s->versions.clear();
    s->versions.push_back(Version{0, std::move(record), true});
    t.mark_live(s);
    return;
  }
  s->record = std::move(record);
  s->stamp = stamp_clock_->fetch_add(1, std::memory_order_relaxed) + 1;
  t.mark_live(s);
}

void Storage::insert(const Key& key, Record record) {
  if (contains(key)) fail(ErrorCode::kConstraint, "duplicate insert of key " + key.to_string());
  put(key, std::move(record));
}

void Storage::erase(const Key& key) {
  Table& t = table(key.table);
  Slot* s = t.find(key.primary);
  if (mode_ == StorageMode::kMultiVersion) {
    if (!s || !contains(key)) fail(ErrorCode::kConstraint, "delete of missing key " + key.to_string());
    std::lock_guard lk(s->latch);
    s->versions.clear();
    t.mark_dead(s);
    return;
  }
  if (!s || !s->live) fail(ErrorCode::kConstraint, "delete of missing key " + key.to_string());
  s->record.clear();
  s->stamp = stamp_clock_->fetch_add(1, std::memory_order_relaxed) + 1;
  t.mark_dead(s);
}

size_t Storage::pending_count() const {
  size_t n = 0;
  for (const auto& t : tables_) {
    if (t) n += t->stats().pending;
  }
  return n;
}

size_t Storage::compact() {
  size_t n = 0;
  for (auto& t : tables_) {
    if (t) n += t->compact();
  }
  return n;
}

Storage::Stamped Storage::read_stamped(const Key& key) const {
  Table& t = table(key.table);
  Slot* s = t.find(key.primary);
  if (!s) return {};
  std::lock_guard lk(s->latch);
  Stamped out;
  out.stamp = s->stamp;
  if (s->live) out.record = s->record;
  return out;
}

uint64_t Storage::stamp_of(const Key& key) const {
  Table& t = table(key.table);
  Slot* s = t.find(key.primary);
  if (!s) return 0;
  std::lock_guard lk(s->latch);
  return s->stamp;
}

uint64_t Storage::write_stamped(const Key& key, std::optional<Record> record) {
  if (mode_ != StorageMode::kSingleVersion) {
    fail(ErrorCode::kSchema, "write_stamped requires single-version storage");
  }
  Table& t = table(key.table);
  t.validate_key(key);
  if (record) t.validate(*record);
  Slot* s = t.find_or_create(key.primary);
  std::lock_guard lk(s->latch);
  uint64_t stamp = stamp_clock_->fetch_add(1, std::memory_order_relaxed) + 1;
  s->stamp = stamp;
  if (record) {
    s->record = std::move(*record);
    t.mark_live(s);
  } else {
    s->record.clear();
    t.mark_dead(s);
  }
  return stamp;
}

namespace {
void require_mv(StorageMode mode) {
  if (mode != StorageMode::kMultiVersion) {
    fail(ErrorCode::kSchema, "versioned operation on single-version storage");
  }
}
}  // namespace

std::optional<Record> Storage::mv_read(const Key& key, uint64_t ts) const {
  require_mv(mode_);
  Slot* s = table(key.table).find(key.primary);
  if (!s) return std::nullopt;
  std::lock_guard lk(s->latch);
  for (const auto& v : s->versions) {
    if (v.committed && v.ts <= ts) return v.record;
  }
  return std::nullopt;
}

uint64_t Storage::mv_latest_committed_ts(const Key& key) const {
  require_mv(mode_);
  Slot* s = table(key.table).find(key.primary);
  if (!s) return 0;
  std::lock_guard lk(s->latch);
  const Version* v = newest_committed(*s);
  return v ? v->ts : 0;
}

bool Storage::mv_has_uncommitted(const Key& key) const {
  require_mv(mode_);
  Slot* s = table(key.table).find(key.primary);
  if (!s) return false;
  std::lock_guard lk(s->latch);
  return !s->versions.empty() && !s->versions.front().committed;
}

void Storage::mv_install(const Key& key, uint64_t ts, std::optional<Record> record,
                         bool committed) {
  require_mv(mode_);
  Table& t = table(key.table);
  t.validate_key(key);
  if (record) t.validate(*record);
  Slot* s = t.find_or_create(key.primary);
  std::lock_guard lk(s->latch);
  if (!s->versions.empty()) {
    const Version& head = s->versions.front();
    if (!head.committed) {
      fail(ErrorCode::kConstraint, "second uncommitted version on key " + key.to_string());
    }
    if (head.ts >= ts) {
      fail(ErrorCode::kConstraint, "version timestamps must increase on key " + key.to_string());
    }
  }
  s->versions.insert(s->versions.begin(), Version{ts, std::move(record), committed});
  if (visible(*s, mode_)) {
    t.mark_live(s);
  } else {
    t.mark_dead(s);
  }
}

void Storage::mv_commit(const Key& key, uint64_t ts) {
  require_mv(mode_);
  Table& t = table(key.table);
  Slot* s = t.find(key.primary);
  if (!s) fail(ErrorCode::kConstraint, "commit of unknown version on " + key.to_string());
  std::lock_guard lk(s->latch);
  if (s->versions.empty() || s->versions.front().committed || s->versions.front().ts != ts) {
    fail(ErrorCode::kConstraint, "no uncommitted version at ts " + std::to_string(ts));
  }
  s->versions.front().committed = true;
  if (visible(*s, mode_)) {
    t.mark_live(s);
  } else {
    t.mark_dead(s);
  }
}

void Storage::mv_abort(const Key& key) {
  require_mv(mode_);
  Slot* s = table(key.table).find(key.primary);
  if (!s) return;
  std::lock_guard lk(s->latch);
  if (!s->versions.empty() && !s->versions.front().committed) {
    s->versions.erase(s->versions.begin());
  }
}

size_t Storage::mv_gc(uint64_t watermark) {
  require_mv(mode_);
  size_t removed = 0;
  for (auto& t : tables_) {
    if (!t) continue;
    for (size_t i = 0; i < kShards; ++i) {
      t->for_each_shard(i, [&](const std::string&, const Slot& cs) {
        auto& s = const_cast<Slot&>(cs);
        std::lock_guard lk(s.latch);
        for (size_t j = 0; j < s.versions.size(); ++j) {
          if (s.versions[j].committed && s.versions[j].ts <= watermark) {
            removed += s.versions.size() - j - 1;
            s.versions.resize(j + 1);
            break;
          }
        }
      });
    }
  }
  return removed;
}

std::vector<Version> Storage::mv_chain(const Key& key) const {
  require_mv(mode_);
  Slot* s = table(key.table).find(key.primary);
  if (!s) return {};
  std::lock_guard lk(s->latch);
  return s->versions;
}

void Storage::for_each_in_section(size_t section, size_t sections,
                                  const std::function<void(const Key&, const Record&)>& fn) const {
  if (sections == 0) fail(ErrorCode::kUsage, "section count must be positive");
  for (size_t id = 0; id < tables_.size(); ++id) {
    if (!tables_[id]) continue;
    Key k;
    k.table = static_cast<TableId>(id);
    for (size_t shard = section; shard < kShards; shard += sections) {
      tables_[id]->for_each_shard(shard, [&](const std::string& primary, const Slot& s) {
        const Record* r = visible(s, mode_);
        if (!r) return;
        k.primary = primary;
        fn(k, *r);
      });
    }
  }
}

void Storage::for_each(const std::function<void(const Key&, const Record&)>& fn) const {
  for_each_in_section(0, 1, fn);
}

std::string Storage::snapshot_digest() const {
  uint64_t h = 14695981039346656037ull;
  auto mix = [&](std::string_view bytes) {
    for (unsigned char c : bytes) {
      h ^= c;
      h *= 1099511628211ull;
    }
  };
  for (size_t id = 0; id < tables_.size(); ++id) {
    if (!tables_[id]) continue;
    std::vector<std::pair<std::string, const Record*>> rows;
    for (size_t shard = 0; shard < kShards; ++shard) {
      tables_[id]->for_each_shard(shard, [&](const std::string& primary, const Slot& s) {
        if (const Record* r = visible(s, mode_)) rows.emplace_back(primary, r);
      });
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (rows.empty()) continue;
    ByteWriter w;
    w.u16(static_cast<uint16_t>(id));
    w.u64(rows.size());
    mix(w.str());
    for (const auto& [primary, rec] : rows) {
      ByteWriter e;
      e.bytes(primary);
      e.u32(static_cast<uint32_t>(rec->size()));
      for (const auto& col : *rec) e.bytes(col);
      mix(e.str());
    }
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

Storage Storage::clone() const {
  Storage copy(mode_);
  copy.tables_.resize(tables_.size());
  for (size_t i = 0; i < tables_.size(); ++i) {
    if (tables_[i]) copy.tables_[i] = tables_[i]->clone();
  }
  copy.stamp_clock_->store(stamp_clock_->load());
  return copy;
}

size_t Storage::live_count() const {
  size_t n = 0;
  for (const auto& t : tables_) {
    if (t) n += t->live();
  }
  return n;
}

size_t Storage::live_count(TableId id) const { return table(id).live(); }

PoolStats Storage::pool_stats(TableId id) const { return table(id).stats(); }

}  // namespace dgcc
