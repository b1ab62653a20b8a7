#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dgcc {

using TableId = uint16_t;

// (table, primary) with a total order: table id first, then bytewise primary.
struct Key {
  TableId table = 0;
  std::string primary;

  auto operator<=>(const Key&) const = default;
  bool operator==(const Key&) const = default;

  // Each part is encoded as 8 big-endian bytes so lexicographic order on the
  // primary matches numeric order on the parts.
  static Key of(TableId table, std::initializer_list<uint64_t> parts);

  std::string to_string() const;
};

struct KeyHash {
  size_t operator()(const Key& k) const noexcept;
};

// Fixed-arity list of byte-string columns.
using Record = std::vector<std::string>;

struct TableSchema {
  TableId id = 0;
  std::string name;
  // Max byte width of each column; the vector length is the arity.
  std::vector<uint32_t> column_widths;
  // Required primary-key length in bytes; 0 disables the check.
  uint32_t key_width = 0;
  // Slots pre-allocated in the first slab.
  size_t initial_capacity = 1024;
};

enum class StorageMode { kSingleVersion, kMultiVersion };

// One entry of a version chain. A missing record is a tombstone.
struct Version {
  uint64_t ts = 0;
  std::optional<Record> record;
  bool committed = false;
};

struct PoolStats {
  size_t slabs = 0;
  size_t capacity = 0;
  size_t live = 0;
  size_t free = 0;
  size_t pending = 0;  // deleted slots waiting for compact()
};

class Table;

// In-memory table store: hash index per table over a slab record pool.
//
// Concurrent access to distinct keys is safe. Conflicting access to one key
// must be serialized by the caller, except for the *_stamped and mv_* calls,
// which take a per-record latch. snapshot_digest(), compact(), clone() and
// the section iterators need a quiesced store.
class Storage {
 public:
  explicit Storage(StorageMode mode = StorageMode::kSingleVersion);
  ~Storage();
  Storage(Storage&&) noexcept;
  Storage& operator=(Storage&&) noexcept;
  Storage(const Storage&) = delete;
  Storage& operator=(const Storage&) = delete;

  StorageMode mode() const noexcept { return mode_; }

  void create_table(TableSchema schema);
  bool has_table(TableId id) const noexcept;
  const TableSchema& schema(TableId id) const;
  std::vector<TableId> table_ids() const;

  std::optional<Record> get(const Key& key) const;
  bool contains(const Key& key) const;
  // Upsert.
  void put(const Key& key, Record record);
  // Constraint error when the key is already live.
  void insert(const Key& key, Record record);
  // Constraint error when the key is not live.
  void erase(const Key& key);
  // Returns deleted slots to the pool free lists; returns how many.
  size_t compact();
  // Deleted slots still indexed, across all tables.
  size_t pending_count() const;

  // Record plus a store-wide unique write stamp (0 = never written), read
  // under the record latch. Used by optimistic validation.
  struct Stamped {
    std::optional<Record> record;
    uint64_t stamp = 0;
  };
  Stamped read_stamped(const Key& key) const;
  uint64_t stamp_of(const Key& key) const;
  // Installs (or deletes, on nullopt) under the record latch and bumps the
  // stamp. Returns the new stamp.
  uint64_t write_stamped(const Key& key, std::optional<Record> record);

  // Multi-version interface; schema error in single-version mode.
  std::optional<Record> mv_read(const Key& key, uint64_t ts) const;
  // Write timestamp of the newest committed version, 0 when none.
  uint64_t mv_latest_committed_ts(const Key& key) const;
  bool mv_has_uncommitted(const Key& key) const;
  // Pushes a version at the head; ts must exceed the current head's ts.
  void mv_install(const Key& key, uint64_t ts, std::optional<Record> record, bool committed);
  void mv_commit(const Key& key, uint64_t ts);
  // Drops an uncommitted head version, if any.
  void mv_abort(const Key& key);
  // Removes every version strictly older than the newest committed version
  // with ts <= watermark. Returns versions removed.
  size_t mv_gc(uint64_t watermark);
  std::vector<Version> mv_chain(const Key& key) const;

  // Deterministic digest over sorted (key, record) pairs of all tables, as a
  // 16-character hex string.
  std::string snapshot_digest() const;

  Storage clone() const;

  size_t live_count() const;
  size_t live_count(TableId id) const;
  PoolStats pool_stats(TableId id) const;

  // Index shards double as checkpoint sections.
  static constexpr size_t kShards = 64;
  // Visits live records whose index shard maps to `section` of `sections`.
  void for_each_in_section(size_t section, size_t sections,
                           const std::function<void(const Key&, const Record&)>& fn) const;
  void for_each(const std::function<void(const Key&, const Record&)>& fn) const;

 private:
  Table& table(TableId id) const;

  StorageMode mode_;
  std::vector<std::unique_ptr<Table>> tables_;
  std::unique_ptr<std::atomic<uint64_t>> stamp_clock_;
};

}  // namespace dgcc
