#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "dgcc/error.hpp"
#include "dgcc/storage.hpp"

using namespace dgcc;

namespace {

TableSchema schema(TableId id, size_t cap = 16) {
  return TableSchema{id, "t" + std::to_string(id), {8, 16}, 8, cap};
}

Record rec(uint64_t v) { return {std::to_string(v), "payload" + std::to_string(v % 7)}; }

Key k(uint64_t i, TableId t = 1) { return Key::of(t, {i}); }

Storage make(StorageMode mode = StorageMode::kSingleVersion, size_t cap = 16) {
  Storage s(mode);
  s.create_table(schema(1, cap));
  return s;
}

}  // namespace

TEST(Key, OrderIsTableThenBytes) {
  EXPECT_LT(Key::of(1, {500}), Key::of(2, {1}));
  EXPECT_LT(Key::of(1, {2}), Key::of(1, {256}));
  EXPECT_EQ(Key::of(3, {1, 2}).to_string(), "3:1.2");
  EXPECT_EQ(KeyHash{}(Key::of(1, {9})), KeyHash{}(Key::of(1, {9})));
}

TEST(Storage, GetOnEmptyTableIsAbsent) {
  Storage s = make();
  EXPECT_FALSE(s.get(k(1)).has_value());
}

TEST(Storage, UnknownTableIsSchemaError) {
  Storage s = make();
  try {
    s.get(k(1, 9));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
}

TEST(Storage, SchemaMismatchRejected) {
  Storage s = make();
  EXPECT_THROW(s.put(k(1), Record{"a"}), Error);
  EXPECT_THROW(s.put(k(1), Record{"a", std::string(17, 'x')}), Error);
  EXPECT_THROW(s.put(Key{1, "short"}, rec(1)), Error);
}

TEST(Storage, ReadYourWriteAndLastWriter) {
  Storage s = make();
  s.put(k(1), rec(1));
  EXPECT_EQ(*s.get(k(1)), rec(1));
  s.put(k(1), rec(2));
  EXPECT_EQ(*s.get(k(1)), rec(2));
  EXPECT_EQ(s.live_count(), 1u);
  s.put(k(2), rec(2));
  EXPECT_EQ(s.live_count(), 2u);
}

TEST(Storage, InsertDeleteCancellation) {
  Storage s = make();
  s.insert(k(5), rec(5));
  s.erase(k(5));
  EXPECT_FALSE(s.get(k(5)));
  s.insert(k(5), rec(6));
  try {
    s.insert(k(5), rec(7));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConstraint);
  }
  s.erase(k(5));
  try {
    s.erase(k(5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConstraint);
  }
}

TEST(Storage, RandomOpsMatchOrderedMapModel) {
  Storage s = make();
  std::map<Key, Record> model;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    Key key = k(rng() % 50);
    uint64_t v = rng() % 1000;
    if (rng() % 2) {
      s.put(key, rec(v));
      model[key] = rec(v);
    } else {
      auto got = s.get(key);
      auto it = model.find(key);
      ASSERT_EQ(got.has_value(), it != model.end());
      if (got) ASSERT_EQ(*got, it->second);
    }
  }
  EXPECT_EQ(s.live_count(), model.size());
}

TEST(Storage, InsertDeleteInterleavingMatchesSetModel) {
  Storage s = make();
  std::set<Key> model;
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    Key key = k(rng() % 40);
    if (model.count(key)) {
      s.erase(key);
      model.erase(key);
    } else {
      s.insert(key, rec(i));
      model.insert(key);
    }
    if (i % 97 == 0) s.compact();
  }
  std::set<Key> live;
  s.for_each([&](const Key& key, const Record&) { live.insert(key); });
  EXPECT_EQ(live, model);
  EXPECT_EQ(s.live_count(), model.size());
}

TEST(Storage, SlabsGrowOnlyPastPreallocation) {
  Storage s = make(StorageMode::kSingleVersion, 16);
  s.put(k(0), rec(0));
  EXPECT_EQ(s.pool_stats(1).slabs, 1u);
  for (uint64_t i = 1; i < 16; ++i) s.put(k(i), rec(i));
  EXPECT_EQ(s.pool_stats(1).slabs, 1u);
  EXPECT_EQ(s.pool_stats(1).capacity, 16u);
  s.put(k(16), rec(16));
  EXPECT_EQ(s.pool_stats(1).slabs, 2u);
  EXPECT_EQ(s.pool_stats(1).capacity, 32u);
  // Overwrites reuse the slot.
  for (uint64_t i = 0; i < 17; ++i) s.put(k(i), rec(i + 1));
  EXPECT_EQ(s.pool_stats(1).capacity, 32u);
}

TEST(Storage, DeletedSlotReturnsToPoolAfterCompact) {
  Storage s = make(StorageMode::kSingleVersion, 4);
  for (uint64_t i = 0; i < 4; ++i) s.insert(k(i), rec(i));
  s.erase(k(2));
  EXPECT_EQ(s.pool_stats(1).pending, 1u);
  EXPECT_EQ(s.pending_count(), 1u);
  EXPECT_EQ(s.pool_stats(1).free, 0u);
  EXPECT_EQ(s.compact(), 1u);
  EXPECT_EQ(s.pool_stats(1).pending, 0u);
  EXPECT_EQ(s.pool_stats(1).free, 1u);
  s.insert(k(9), rec(9));
  EXPECT_EQ(s.pool_stats(1).slabs, 1u);
}

TEST(Storage, PoolNeverSharesSlotBetweenKeys) {
  Storage s = make(StorageMode::kSingleVersion, 2);
  std::mt19937_64 rng(3);
  std::map<Key, Record> model;
  for (int i = 0; i < 300; ++i) {
    Key key = k(rng() % 20);
    if (model.count(key) && rng() % 2) {
      s.erase(key);
      model.erase(key);
    } else {
      s.put(key, rec(i));
      model[key] = rec(i);
    }
    if (i % 13 == 0) s.compact();
  }
  for (auto& [key, r] : model) EXPECT_EQ(*s.get(key), r);
}

TEST(Storage, StampsAreUniqueAndBumpedOnWrite) {
  Storage s = make();
  EXPECT_EQ(s.stamp_of(k(1)), 0u);
  uint64_t a = s.write_stamped(k(1), rec(1));
  uint64_t b = s.write_stamped(k(2), rec(2));
  EXPECT_NE(a, b);
  EXPECT_EQ(s.read_stamped(k(1)).stamp, a);
  uint64_t c = s.write_stamped(k(1), std::nullopt);
  EXPECT_GT(c, a);
  EXPECT_FALSE(s.read_stamped(k(1)).record);
  EXPECT_FALSE(s.get(k(1)));
}

TEST(Storage, EmptyDigestIsConstant) {
  Storage a;
  EXPECT_EQ(a.snapshot_digest(), "cbf29ce484222325");
  Storage b = make();
  EXPECT_EQ(b.snapshot_digest(), "cbf29ce484222325");
}

TEST(Storage, DigestIndependentOfInsertionOrder) {
  std::vector<uint64_t> ids(100);
  for (uint64_t i = 0; i < 100; ++i) ids[i] = i;
  Storage a = make();
  for (auto i : ids) a.put(k(i), rec(i));
  std::shuffle(ids.begin(), ids.end(), std::mt19937_64(5));
  Storage b = make();
  for (auto i : ids) b.put(k(i), rec(i));
  EXPECT_EQ(a.snapshot_digest(), b.snapshot_digest());
  b.put(k(3), rec(4));
  EXPECT_NE(a.snapshot_digest(), b.snapshot_digest());
}

TEST(Storage, DigestDeterministicAcrossRunsOfSameSchedule) {
  auto run = [] {
    Storage s = make();
    std::mt19937_64 rng(21);
    for (int i = 0; i < 400; ++i) {
      Key key = k(rng() % 64);
      if (s.contains(key) && rng() % 3 == 0) {
        s.erase(key);
      } else {
        s.put(key, rec(rng() % 100));
      }
    }
    return s.snapshot_digest();
  };
  EXPECT_EQ(run(), run());
}

TEST(Storage, CloneIsIndependent) {
  Storage a = make();
  a.put(k(1), rec(1));
  Storage b = a.clone();
  b.put(k(1), rec(2));
  EXPECT_EQ(*a.get(k(1)), rec(1));
  EXPECT_EQ(*b.get(k(1)), rec(2));
}

TEST(Storage, SectionsPartitionTheStore) {
  Storage s = make();
  for (uint64_t i = 0; i < 200; ++i) s.put(k(i), rec(i));
  for (size_t sections : {1u, 3u, 4u, 64u}) {
    std::multiset<Key> seen;
    for (size_t sec = 0; sec < sections; ++sec) {
      s.for_each_in_section(sec, sections, [&](const Key& key, const Record&) { seen.insert(key); });
    }
    EXPECT_EQ(seen.size(), 200u);
    EXPECT_EQ(std::set<Key>(seen.begin(), seen.end()).size(), 200u);
  }
}

// Multi-version behaviour.

TEST(Versioned, NoVersionAtOrBelowTsIsAbsent) {
  Storage s = make(StorageMode::kMultiVersion);
  s.mv_install(k(1), 5, rec(5), true);
  EXPECT_FALSE(s.mv_read(k(1), 4));
  EXPECT_FALSE(s.mv_read(k(2), 100));
}

TEST(Versioned, ReadsLargestCommittedAtOrBelow) {
  Storage s = make(StorageMode::kMultiVersion);
  s.mv_install(k(1), 5, rec(5), true);
  s.mv_install(k(1), 9, rec(9), true);
  EXPECT_EQ(*s.mv_read(k(1), 7), rec(5));
  EXPECT_EQ(*s.mv_read(k(1), 9), rec(9));
  EXPECT_EQ(*s.get(k(1)), rec(9));
}

TEST(Versioned, UncommittedInvisibleAndSingle) {
  Storage s = make(StorageMode::kMultiVersion);
  s.mv_install(k(1), 2, rec(2), true);
  s.mv_install(k(1), 4, rec(4), false);
  EXPECT_TRUE(s.mv_has_uncommitted(k(1)));
  EXPECT_EQ(*s.mv_read(k(1), 10), rec(2));
  EXPECT_THROW(s.mv_install(k(1), 6, rec(6), false), Error);
  s.mv_commit(k(1), 4);
  EXPECT_EQ(*s.mv_read(k(1), 10), rec(4));
  EXPECT_EQ(s.mv_latest_committed_ts(k(1)), 4u);
  s.mv_install(k(1), 7, rec(7), false);
  s.mv_abort(k(1));
  EXPECT_EQ(s.mv_chain(k(1)).size(), 2u);
  EXPECT_THROW(s.mv_install(k(1), 3, rec(3), true), Error);
}

TEST(Versioned, SingleVersionModeRejectsMvOps) {
  Storage s = make();
  EXPECT_THROW(s.mv_read(k(1), 1), Error);
}

TEST(Versioned, GcOnSingleVersionChainRemovesNothing) {
  Storage s = make(StorageMode::kMultiVersion);
  s.mv_install(k(1), 3, rec(3), true);
  EXPECT_EQ(s.mv_gc(10), 0u);
}

TEST(Versioned, GcRemovesOnlyOlderThanNewestBelowWatermark) {
  Storage s = make(StorageMode::kMultiVersion);
  for (uint64_t ts : {3, 5, 9}) s.mv_install(k(1), ts, rec(ts), true);
  EXPECT_EQ(s.mv_gc(6), 1u);
  auto chain = s.mv_chain(k(1));
  ASSERT_EQ(chain.size(), 2u);
  EXPECT_EQ(chain[0].ts, 9u);
  EXPECT_EQ(chain[1].ts, 5u);
}

TEST(Versioned, RandomHistoriesMatchScanOracleAndGcPreservesReads) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Storage s = make(StorageMode::kMultiVersion);
    // Oracle: plain list of (ts, value, committed) per key.
    std::map<Key, std::vector<std::tuple<uint64_t, std::optional<uint64_t>, bool>>> oracle;
    std::map<Key, uint64_t> next_ts;
    for (int i = 0; i < 60; ++i) {
      Key key = k(rng() % 5);
      auto& hist = oracle[key];
      if (!hist.empty() && !std::get<2>(hist.back())) {
        if (rng() % 2) {
          s.mv_commit(key, std::get<0>(hist.back()));
          std::get<2>(hist.back()) = true;
        } else {
          s.mv_abort(key);
          hist.pop_back();
        }
        continue;
      }
      uint64_t ts = (next_ts[key] += 1 + rng() % 4);
      bool committed = rng() % 3 != 0;
      std::optional<uint64_t> val;
      if (rng() % 8 != 0) val = rng() % 1000;
      s.mv_install(key, ts, val ? std::optional<Record>(rec(*val)) : std::nullopt, committed);
      hist.emplace_back(ts, val, committed);
    }
    auto scan = [&](const Key& key, uint64_t ts) -> std::optional<Record> {
      std::optional<Record> best;
      uint64_t best_ts = 0;
      bool found = false;
      for (auto& [vts, val, committed] : oracle[key]) {
        if (committed && vts <= ts && (!found || vts > best_ts)) {
          found = true;
          best_ts = vts;
          best = val ? std::optional<Record>(rec(*val)) : std::nullopt;
        }
      }
      return best;
    };
    for (auto& [key, hist] : oracle) {
      for (uint64_t ts = 0; ts < 200; ts += 3) ASSERT_EQ(s.mv_read(key, ts), scan(key, ts));
      auto chain = s.mv_chain(key);
      for (size_t j = 1; j < chain.size(); ++j) ASSERT_GT(chain[j - 1].ts, chain[j].ts);
    }
    uint64_t wm = rng() % 150;
    s.mv_gc(wm);
    for (auto& [key, hist] : oracle) {
      for (uint64_t ts = wm; ts < 200; ts += 2) ASSERT_EQ(s.mv_read(key, ts), scan(key, ts));
    }
  }
}
