#include <cmath>
#include <cstring>
#include <random>
#include <unordered_map>
#include <vector>

#include "doctest.h"
#include "nbh/table.hpp"

using namespace nbh;

namespace {

// Brute-force a key that hashes to `target` under the table's seed.
template <class Table>
std::uint64_t key_for_index(const Table& t, std::size_t target, std::uint64_t& cursor) {
  for (;;) {
    std::uint64_t k = cursor++;
    if (k == kEmptyKey) continue;
    if (t.bucket_index(k) == target) return k;
  }
}

template <class Table>
void fill_index(Table& t, std::size_t idx, std::uint64_t& cursor) {
  REQUIRE(t.raw_buckets()[idx].key == kEmptyKey);
  std::uint64_t k = key_for_index(t, idx, cursor);
  t.insert(k, k & PackedSlot::kPayloadMask);
  REQUIRE(t.raw_buckets()[idx].key == k);
}

template <class Table>
void check_against(const Table& t, const std::unordered_map<std::uint64_t, std::uint64_t>& oracle) {
  REQUIRE(t.size() == oracle.size());
  std::uint64_t v;
  for (auto& [k, p] : oracle) {
    REQUIRE(t.lookup(k, v));
    REQUIRE(v == p);
  }
  std::size_t seen = 0;
  t.for_each([&](std::uint64_t k, std::uint64_t p) {
    auto it = oracle.find(k);
    REQUIRE(it != oracle.end());
    REQUIRE(it->second == p);
    ++seen;
  });
  REQUIRE(seen == oracle.size());
}

}  // namespace

TEST_CASE("hash index is deterministic and in range") {
  NeighborHash t(1 << 12);
  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t k = rng();
    auto a = t.bucket_index(k);
    auto b = t.bucket_index(k);
    CHECK(a == b);
    CHECK(a < t.capacity());
  }
}

TEST_CASE("bucket index histogram passes a chi-square uniformity check") {
  NeighborHash t(1 << 16);
  const std::size_t bins = t.capacity();
  std::vector<std::uint32_t> hist(bins, 0);
  std::mt19937_64 rng(12);
  const std::size_t n = 1'000'000;
  for (std::size_t i = 0; i < n; ++i) ++hist[t.bucket_index(rng())];
  const double expect = static_cast<double>(n) / static_cast<double>(bins);
  double chi2 = 0.0;
  for (auto c : hist) {
    double d = static_cast<double>(c) - expect;
    chi2 += d * d / expect;
  }
  const double dof = static_cast<double>(bins - 1);
  const double sigma = std::sqrt(2.0 * dof);
  CHECK(chi2 > dof - 6.0 * sigma);
  CHECK(chi2 < dof + 6.0 * sigma);
}

TEST_CASE("insert into empty root places a host with terminator offset") {
  NeighborHash t(1 << 8);
  std::uint64_t cursor = 1;
  std::uint64_t k = key_for_index(t, 77, cursor);
  auto out = t.insert(k, 1234);
  CHECK_FALSE(out.updated);
  const Bucket& b = t.raw_buckets()[77];
  CHECK(b.key == k);
  PackedSlot s{b.slot};
  CHECK(s.payload() == 1234);
  CHECK(s.offset_code() == 0);
}

TEST_CASE("sentinel key and oversized payload are rejected") {
  NeighborHash t;
  CHECK_THROWS_AS(t.insert(kEmptyKey, 1), std::invalid_argument);
  CHECK_THROWS_AS(t.insert(1, 1ull << 52), std::invalid_argument);
  std::uint64_t v;
  CHECK_FALSE(t.lookup(kEmptyKey, v));
  CHECK_FALSE(t.erase(kEmptyKey));
}

TEST_CASE("two colliding keys chain within the root cacheline when space allows") {
  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 8, cfg);
  std::uint64_t cursor = 1;
  std::size_t root = 100;
  std::uint64_t k1 = key_for_index(t, root, cursor);
  std::uint64_t k2 = key_for_index(t, root, cursor);
  t.insert(k1, 1);
  t.insert(k2, 2);
  const Bucket& rb = t.raw_buckets()[root];
  CHECK(rb.key == k1);
  PackedSlot s{rb.slot};
  REQUIRE(s.offset_code() != 0);
  std::size_t second = root + PackedSlot::decode_offset(s.offset_code());
  CHECK(t.raw_buckets()[second].key == k2);
  CHECK(second / 4 == root / 4);  // same 64-byte line, table otherwise empty
  std::uint64_t v;
  CHECK((t.lookup(k1, v) && v == 1));
  CHECK((t.lookup(k2, v) && v == 2));
  std::string err;
  CHECK_MESSAGE(t.check_invariants(&err), err);
}

TEST_CASE("inserting into a lodger's bucket relocates the lodger and claims the root") {
  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 8, cfg);
  std::uint64_t cursor = 1;
  std::size_t root = 64;
  std::uint64_t x1 = key_for_index(t, root, cursor);
  std::uint64_t x2 = key_for_index(t, root, cursor);
  std::unordered_map<std::uint64_t, std::uint64_t> oracle;
  t.insert(x1, 10);
  t.insert(x2, 20);
  oracle[x1] = 10;
  oracle[x2] = 20;
  // x2 sits as a lodger somewhere; aim a fresh key at exactly that bucket.
  std::size_t p = t.capacity();
  for (std::size_t i = 0; i < t.capacity(); ++i)
    if (t.raw_buckets()[i].key == x2) p = i;
  REQUIRE(p < t.capacity());
  REQUIRE(p != root);
  std::uint64_t y = key_for_index(t, p, cursor);
  t.insert(y, 30);
  oracle[y] = 30;
  CHECK(t.raw_buckets()[p].key == y);  // y is host in its own root now
  check_against(t, oracle);
  std::string err;
  CHECK_MESSAGE(t.check_invariants(&err), err);
}

TEST_CASE("find_free_neighbor prefers the anchor cacheline absolutely") {
  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 8, cfg);
  std::uint64_t cursor = 1;
  // Line [100,103]; anchor 102; free at 100 (distance 2 backward) and 104
  // (distance 2 forward but next line).
  for (std::size_t i : {101u, 102u, 103u}) fill_index(t, i, cursor);
  CHECK(t.find_free_neighbor(102) == 100);
}

TEST_CASE("find_free_neighbor takes minimal distance outside the line, forward ties win") {
  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 8, cfg);
  std::uint64_t cursor = 1;
  for (std::size_t i = 93; i <= 105; ++i) fill_index(t, i, cursor);
  // Nearest free: 106 at +5 vs 92 at -9.
  CHECK(t.find_free_neighbor(101) == 106);

  SUBCASE("equidistant candidates break toward positive") {
    NeighborHash t2(1 << 8, cfg);
    std::uint64_t cur2 = 1;
    for (std::size_t i = 95; i <= 107; ++i) fill_index(t2, i, cur2);
    // anchor 101: free at 108 (+7) and 94 (-7).
    CHECK(t2.find_free_neighbor(101) == 108);
  }
}

TEST_CASE("find_free_neighbor respects the encodable offset range") {
  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 13, cfg);
  std::uint64_t cursor = 1;
  const std::size_t anchor = 4000;
  for (std::size_t i = anchor - 2048; i <= anchor + 2048; ++i)
    if (i != anchor - 2047) fill_index(t, i, cursor);
  CHECK(t.find_free_neighbor(anchor) == anchor - 2047);
  fill_index(t, anchor - 2047, cursor);
  // Only in-range free bucket is now anchor-2048: not encodable.
  CHECK(t.find_free_neighbor(anchor) == NeighborHash::kNoFreeBucket);
}

TEST_CASE("lookup on empty table misses; large random build matches the oracle") {
  NeighborHash t;
  std::uint64_t v;
  CHECK_FALSE(t.lookup(123, v));

  std::mt19937_64 rng(77);
  std::unordered_map<std::uint64_t, std::uint64_t> oracle;
  NeighborHash big(1 << 10);
  const std::size_t n = 1'000'000;
  oracle.reserve(n);
  while (oracle.size() < n) {
    std::uint64_t k = rng();
    if (k == kEmptyKey) continue;
    std::uint64_t p = rng() & PackedSlot::kPayloadMask;
    big.insert(k, p);
    oracle[k] = p;
  }
  std::uint64_t val;
  for (auto& [k, p] : oracle) {
    REQUIRE(big.lookup(k, val));
    REQUIRE(val == p);
  }
  for (std::size_t i = 0; i < 100'000; ++i) {
    std::uint64_t k = rng();
    if (oracle.count(k) || k == kEmptyKey) continue;
    REQUIRE_FALSE(big.lookup(k, val));
  }
  CHECK(big.load_factor() <= big.config().max_load_factor + 1e-9);
}

TEST_CASE("batch_lookup_scalar preserves order, length, duplicates") {
  NeighborHash t(1 << 8);
  t.insert(5, 50);
  t.insert(9, 90);
  std::vector<std::uint64_t> keys{};
  CHECK(t.batch_lookup_scalar(keys).empty());
  keys = {5, 7, 9, 5, 5, kEmptyKey};
  auto res = t.batch_lookup_scalar(keys);
  REQUIRE(res.size() == keys.size());
  CHECK(res[0] == 50);
  CHECK(res[1] == kMissValue);
  CHECK(res[2] == 90);
  CHECK(res[3] == 50);
  CHECK(res[4] == 50);
  CHECK(res[5] == kMissValue);
  for (std::size_t i = 0; i < keys.size(); ++i)
    CHECK(res[i] == t.lookup_or_miss(keys[i]));
}

TEST_CASE("erase: absent, lodger mid-chain, host promotion") {
  CHECK_FALSE(NeighborHash().erase(42));

  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 8, cfg);
  std::uint64_t cursor = 1;
  std::size_t root = 40;
  std::uint64_t k1 = key_for_index(t, root, cursor);
  std::uint64_t k2 = key_for_index(t, root, cursor);
  std::uint64_t k3 = key_for_index(t, root, cursor);
  std::unordered_map<std::uint64_t, std::uint64_t> oracle;
  for (auto [k, p] : {std::pair{k1, 1ull}, {k2, 2ull}, {k3, 3ull}}) {
    t.insert(k, p);
    oracle[k] = p;
  }

  SUBCASE("erase chain-middle record") {
    CHECK(t.erase(k2));
    oracle.erase(k2);
    check_against(t, oracle);
    std::string err;
    CHECK_MESSAGE(t.check_invariants(&err), err);
  }

  SUBCASE("erase host promotes the first successor into the root") {
    CHECK(t.erase(k1));
    oracle.erase(k1);
    CHECK(t.raw_buckets()[root].key == k2);
    check_against(t, oracle);
    std::string err;
    CHECK_MESSAGE(t.check_invariants(&err), err);
  }

  SUBCASE("erase tail then reuse") {
    CHECK(t.erase(k3));
    CHECK_FALSE(t.erase(k3));
    oracle.erase(k3);
    check_against(t, oracle);
  }
}

TEST_CASE("grow preserves contents and fires exactly once at the threshold") {
  NeighborHash empty(16);
  empty.grow();
  CHECK(empty.capacity() == 32);
  CHECK(empty.size() == 0);

  NeighborHash t(1 << 8);
  std::mt19937_64 rng(5);
  std::unordered_map<std::uint64_t, std::uint64_t> oracle;
  const std::size_t threshold =
      static_cast<std::size_t>(t.capacity() * t.config().max_load_factor);
  while (t.size() < threshold) {
    std::uint64_t k = rng();
    if (k == kEmptyKey || oracle.count(k)) continue;
    std::uint64_t p = rng() & PackedSlot::kPayloadMask;
    t.insert(k, p);
    oracle[k] = p;
  }
  CHECK(t.capacity() == 1 << 8);
  std::uint64_t k = rng();
  auto out = t.insert(k, 7);
  oracle[k] = 7;
  CHECK(out.growths == 1);
  CHECK(t.capacity() == 1 << 9);
  check_against(t, oracle);
}

TEST_CASE("overwrite at the load-factor threshold leaves the structure unchanged") {
  NeighborHash t(1 << 8);
  std::mt19937_64 rng(6);
  std::vector<std::uint64_t> keys;
  const std::size_t threshold =
      static_cast<std::size_t>(t.capacity() * t.config().max_load_factor);
  while (t.size() < threshold) {
    std::uint64_t k = rng();
    if (k == kEmptyKey) continue;
    if (!t.insert(k, 1).updated) keys.push_back(k);
  }
  std::vector<Bucket> before(t.raw_buckets(), t.raw_buckets() + t.capacity());
  auto out = t.insert(keys[3], 99);
  CHECK(out.updated);
  CHECK(out.growths == 0);
  CHECK(t.capacity() == before.size());
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < before.size(); ++i) {
    if (before[i].key != t.raw_buckets()[i].key) ++diffs;
    if (PackedSlot{before[i].slot}.offset_code() !=
        PackedSlot{t.raw_buckets()[i].slot}.offset_code())
      ++diffs;
  }
  CHECK(diffs == 0);
}

TEST_CASE("identical seed and sequence produce bit-identical tables") {
  auto build = [](std::uint64_t seed) {
    TableConfig cfg;
    cfg.seed = seed;
    NeighborHash t(1 << 10, cfg);
    std::mt19937_64 rng(99);
    for (int i = 0; i < 20000; ++i) {
      std::uint64_t k = rng();
      if (k == kEmptyKey) continue;
      t.insert(k, k & PackedSlot::kPayloadMask);
      if (i % 7 == 0) t.erase(rng() & 0xffff);
    }
    return t;
  };
  NeighborHash a = build(3), b = build(3), c = build(4);
  REQUIRE(a.capacity() == b.capacity());
  CHECK(std::memcmp(a.raw_buckets(), b.raw_buckets(), a.capacity() * sizeof(Bucket)) == 0);
  bool differs = c.capacity() != a.capacity() ||
                 std::memcmp(a.raw_buckets(), c.raw_buckets(),
                             a.capacity() * sizeof(Bucket)) != 0;
  CHECK(differs);
}

TEST_CASE("APCL is exactly 1.0 when every key is a collision-free host") {
  TableConfig cfg;
  cfg.max_load_factor = 1.0;
  NeighborHash t(1 << 8, cfg);
  std::uint64_t cursor = 1;
  std::vector<std::uint64_t> keys;
  for (std::size_t i = 0; i < t.capacity(); i += 8) {
    std::uint64_t k = key_for_index(t, i, cursor);
    t.insert(k, 7);
    keys.push_back(k);
  }
  auto stats = t.measure_apcl(keys);
  REQUIRE(stats.hits == keys.size());
  REQUIRE(stats.apcl().has_value());
  CHECK(*stats.apcl() == 1.0);

  SUBCASE("zero successful lookups reports undefined") {
    std::vector<std::uint64_t> absent{kEmptyKey - 1};
    auto s2 = t.measure_apcl(absent);
    CHECK(s2.hits == 0);
    CHECK_FALSE(s2.apcl().has_value());
  }
}

TEST_CASE("random op mix matches a chaining-map oracle and keeps invariants") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    NeighborHash t(64);
    std::unordered_map<std::uint64_t, std::uint64_t> oracle;
    std::mt19937_64 rng(seed);
    const std::uint64_t key_space = 40'000;
    for (int op = 0; op < 120'000; ++op) {
      std::uint64_t k = (rng() % key_space) + 1;
      switch (rng() % 4) {
        case 0:
        case 1: {
          std::uint64_t p = rng() & PackedSlot::kPayloadMask;
          t.insert(k, p);
          oracle[k] = p;
          break;
        }
        case 2: {
          bool a = t.erase(k);
          bool b = oracle.erase(k) > 0;
          REQUIRE(a == b);
          break;
        }
        default: {
          std::uint64_t v;
          bool found = t.lookup(k, v);
          auto it = oracle.find(k);
          REQUIRE(found == (it != oracle.end()));
          if (found) REQUIRE(v == it->second);
        }
      }
      REQUIRE(t.load_factor() <= t.config().max_load_factor + 1e-9);
    }
    check_against(t, oracle);
    std::string err;
    REQUIRE_MESSAGE(t.check_invariants(&err), err);
  }
}

TEST_CASE("head-anchored probing stays correct") {
  TableConfig cfg;
  cfg.head_anchor = true;
  NeighborHash t(256, cfg);
  std::unordered_map<std::uint64_t, std::uint64_t> oracle;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 30'000; ++i) {
    std::uint64_t k = (rng() % 10'000) + 1;
    std::uint64_t p = rng() & PackedSlot::kPayloadMask;
    t.insert(k, p);
    oracle[k] = p;
    if (i % 3 == 0) {
      std::uint64_t e = (rng() % 10'000) + 1;
      REQUIRE(t.erase(e) == (oracle.erase(e) > 0));
    }
  }
  check_against(t, oracle);
  std::string err;
  REQUIRE_MESSAGE(t.check_invariants(&err), err);
}
