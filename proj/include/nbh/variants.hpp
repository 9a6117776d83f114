#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nbh/common.hpp"
#include "nbh/packed_slot.hpp"
#include "nbh/probe_meter.hpp"
#include "nbh/table.hpp"

namespace nbh {

// Classic coalesced hashing: a fixed cellar region at the top of the array
// takes colliders first; when it runs out, colliders fall back into the
// address region and chains start to merge. Links are full-width indices in
// a side array. No relocation. Baseline rung of the ablation ladder.
class CoalescedTable {
 public:
  static constexpr std::size_t kMinCapacity = 16;
  static constexpr double kDefaultCellarFraction = 0.14;

  explicit CoalescedTable(std::size_t min_capacity = kMinCapacity, TableConfig cfg = {},
                          double cellar_fraction = kDefaultCellarFraction)
      : cfg_(cfg), cellar_fraction_(cellar_fraction) {
    if (cellar_fraction_ < 0.0 || cellar_fraction_ >= 1.0)
      throw std::invalid_argument("cellar fraction out of [0,1)");
    std::size_t cap = kMinCapacity;
    while (cap < min_capacity) cap <<= 1;
    init_arrays(cap);
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return cap_; }
  std::size_t address_region() const noexcept { return addr_; }
  double load_factor() const noexcept {
    return static_cast<double>(count_) / static_cast<double>(cap_);
  }
  std::size_t memory_bytes() const noexcept {
    return cap_ * (sizeof(Bucket) + sizeof(std::uint32_t));
  }

  std::size_t bucket_index(std::uint64_t key) const noexcept {
    return seeded_hash(key, cfg_.seed) % addr_;
  }

  InsertOutcome insert(std::uint64_t key, std::uint64_t payload) {
    if (key == kEmptyKey) throw std::invalid_argument("reserved sentinel key");
    if (payload > PackedSlot::kPayloadMask)
      throw std::invalid_argument("payload exceeds 52 bits");
    InsertOutcome out;
    if (count_ + 1 > max_count()) {
      grow();
      ++out.growths;
    }
    for (;;) {
      if (try_insert(key, payload, out.updated)) break;
      grow();
      ++out.growths;
    }
    if (!out.updated) ++count_;
    return out;
  }

  template <class Meter = NullMeter>
  bool lookup(std::uint64_t key, std::uint64_t& payload_out, Meter& meter) const {
    if (NBH_UNLIKELY(key == kEmptyKey)) {
      meter.finish(false);
      return false;
    }
    std::size_t cur = bucket_index(key);
    if (buckets_[cur].key == kEmptyKey) {
      meter.touch(&buckets_[cur]);
      meter.finish(false);
      return false;
    }
    for (;;) {
      meter.touch(&buckets_[cur]);
      if (buckets_[cur].key == key) {
        payload_out = PackedSlot{buckets_[cur].slot}.payload();
        meter.finish(true);
        return true;
      }
      meter.touch(&next_[cur]);
      std::uint32_t nxt = next_[cur];
      if (nxt == kNoLink) {
        meter.finish(false);
        return false;
      }
      cur = nxt;
    }
  }

  bool lookup(std::uint64_t key, std::uint64_t& payload_out) const {
    NullMeter m;
    return lookup(key, payload_out, m);
  }

  std::uint64_t lookup_or_miss(std::uint64_t key) const {
    std::uint64_t v;
    return lookup(key, v) ? v : kMissValue;
  }

  void batch_lookup_scalar(std::span<const std::uint64_t> keys,
                           std::span<std::uint64_t> out) const {
    for (std::size_t i = 0; i < keys.size(); ++i) out[i] = lookup_or_miss(keys[i]);
  }

  ProbeStats measure_apcl(std::span<const std::uint64_t> keys) const {
    LineMeter meter;
    std::uint64_t v;
    for (std::uint64_t k : keys) lookup(k, v, meter);
    return meter.stats();
  }

  // Unlinks the record, then reinserts the rest of its physical chain so
  // that merged-chain reachability survives the hole.
  bool erase(std::uint64_t key) {
    if (key == kEmptyKey) return false;
    std::size_t j = bucket_index(key);
    if (buckets_[j].key == kEmptyKey) return false;
    std::size_t prev = kNone, cur = j;
    while (buckets_[cur].key != key) {
      std::uint32_t nxt = next_[cur];
      if (nxt == kNoLink) return false;
      prev = cur;
      cur = nxt;
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> suffix;
    std::size_t s = next_[cur];
    while (s != kNoLink) {
      suffix.emplace_back(buckets_[s].key, PackedSlot{buckets_[s].slot}.payload());
      std::size_t nx = next_[s];
      clear_bucket(s);
      s = nx;
    }
    clear_bucket(cur);
    if (prev != kNone) next_[prev] = kNoLink;
    count_ -= suffix.size() + 1;
    for (auto& [k, p] : suffix) {
      bool updated = false;
      while (!try_insert(k, p, updated)) grow();
      ++count_;
    }
    return true;
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < cap_; ++i)
      if (buckets_[i].key != kEmptyKey)
        fn(buckets_[i].key, PackedSlot{buckets_[i].slot}.payload());
  }

  bool check_invariants(std::string* err = nullptr) const {
    auto fail = [&](const char* m) {
      if (err) *err = m;
      return false;
    };
    std::size_t occupied = 0;
    for (std::size_t i = 0; i < cap_; ++i) {
      if (buckets_[i].key == kEmptyKey) {
        if (next_[i] != kNoLink) return fail("empty bucket with link");
        continue;
      }
      ++occupied;
      // Reachability from the record's own root.
      std::size_t cur = bucket_index(buckets_[i].key), steps = 0;
      bool found = false;
      while (cur != kNoLink) {
        if (cur == i) {
          found = true;
          break;
        }
        if (buckets_[cur].key == kEmptyKey) return fail("chain passes empty bucket");
        cur = next_[cur];
        if (++steps > count_ + 1) return fail("cycle");
      }
      if (!found) return fail("record unreachable from its root");
    }
    if (occupied != count_) return fail("count mismatch");
    return true;
  }

 private:
  static constexpr std::size_t kNone = ~std::size_t{0};

  AlignedPtr<Bucket> buckets_;
  AlignedPtr<std::uint32_t> next_;
  std::size_t cap_ = 0;
  std::size_t addr_ = 0;  // address region size; cellar is [addr_, cap_)
  std::size_t count_ = 0;
  std::size_t cursor_ = 0;  // descending free-bucket cursor
  TableConfig cfg_;
  double cellar_fraction_;

  std::size_t max_count() const noexcept {
    return static_cast<std::size_t>(cfg_.max_load_factor * static_cast<double>(cap_));
  }

  void init_arrays(std::size_t cap) {
    buckets_ = make_aligned_array<Bucket>(cap);
    next_ = make_aligned_array<std::uint32_t>(cap);
    for (std::size_t i = 0; i < cap; ++i) {
      buckets_[i] = Bucket{kEmptyKey, 0};
      next_[i] = kNoLink;
    }
    cap_ = cap;
    std::size_t cellar = static_cast<std::size_t>(cellar_fraction_ * static_cast<double>(cap));
    addr_ = cap - cellar;
    count_ = 0;
    cursor_ = cap - 1;
  }

  void clear_bucket(std::size_t i) noexcept {
    buckets_[i] = Bucket{kEmptyKey, 0};
    next_[i] = kNoLink;
  }

  std::size_t alloc_free() noexcept {
    for (int sweep = 0; sweep < 2; ++sweep) {
      std::size_t c = cursor_;
      for (;;) {
        if (buckets_[c].key == kEmptyKey) {
          cursor_ = c == 0 ? cap_ - 1 : c - 1;
          return c;
        }
        if (c == 0) break;
        --c;
      }
      cursor_ = cap_ - 1;  // erase may have freed buckets above the cursor
    }
    return kNone;
  }

  bool try_insert(std::uint64_t key, std::uint64_t payload, bool& updated) {
    std::size_t j = bucket_index(key);
    if (buckets_[j].key == kEmptyKey) {
      buckets_[j] = Bucket{key, PackedSlot::make(0, payload).raw};
      next_[j] = kNoLink;
      return true;
    }
    std::size_t cur = j;
    for (;;) {
      if (buckets_[cur].key == key) {
        buckets_[cur].slot = PackedSlot{buckets_[cur].slot}.with_payload(payload).raw;
        updated = true;
        return true;
      }
      std::uint32_t nxt = next_[cur];
      if (nxt == kNoLink) break;
      cur = nxt;
    }
    std::size_t nb = alloc_free();
    if (nb == kNone) return false;
    buckets_[nb] = Bucket{key, PackedSlot::make(0, payload).raw};
    next_[nb] = kNoLink;
    next_[cur] = static_cast<std::uint32_t>(nb);
    return true;
  }

  void grow() {
    CoalescedTable next(cap_ * 2, cfg_, cellar_fraction_);
    for (std::size_t i = 0; i < cap_; ++i) {
      if (buckets_[i].key == kEmptyKey) continue;
      bool updated = false;
      if (!next.try_insert(buckets_[i].key, PackedSlot{buckets_[i].slot}.payload(), updated))
        throw std::runtime_error("coalesced grow failed");
      ++next.count_;
    }
    *this = std::move(next);
  }

 public:
  CoalescedTable(CoalescedTable&&) = default;
  CoalescedTable& operator=(CoalescedTable&&) = default;
};

// Open addressing with forward linear probing; the Table 1 baseline.
class LinearProbingTable {
 public:
  static constexpr std::size_t kMinCapacity = 16;

  explicit LinearProbingTable(std::size_t min_capacity = kMinCapacity, TableConfig cfg = {})
      : cfg_(cfg) {
    std::size_t cap = kMinCapacity;
    while (cap < min_capacity) cap <<= 1;
    init_arrays(cap);
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return cap_; }
  double load_factor() const noexcept {
    return static_cast<double>(count_) / static_cast<double>(cap_);
  }
  std::size_t memory_bytes() const noexcept { return cap_ * sizeof(Bucket); }

  std::size_t bucket_index(std::uint64_t key) const noexcept {
    return seeded_hash(key, cfg_.seed) & mask_;
  }

  InsertOutcome insert(std::uint64_t key, std::uint64_t payload) {
    if (key == kEmptyKey) throw std::invalid_argument("reserved sentinel key");
    if (payload > PackedSlot::kPayloadMask)
      throw std::invalid_argument("payload exceeds 52 bits");
    InsertOutcome out;
    if (count_ + 1 > max_count()) {
      grow();
      ++out.growths;
    }
    std::size_t i = bucket_index(key);
    for (;;) {
      if (buckets_[i].key == kEmptyKey) {
        buckets_[i] = Bucket{key, payload};
        ++count_;
        return out;
      }
      if (buckets_[i].key == key) {
        buckets_[i].slot = payload;
        out.updated = true;
        return out;
      }
      i = (i + 1) & mask_;
    }
  }

  template <class Meter = NullMeter>
  bool lookup(std::uint64_t key, std::uint64_t& payload_out, Meter& meter) const {
    if (NBH_UNLIKELY(key == kEmptyKey)) {
      meter.finish(false);
      return false;
    }
    std::size_t i = bucket_index(key);
    for (;;) {
      meter.touch(&buckets_[i]);
      if (buckets_[i].key == key) {
        payload_out = buckets_[i].slot;
        meter.finish(true);
        return true;
      }
      if (buckets_[i].key == kEmptyKey) {
        meter.finish(false);
        return false;
      }
      i = (i + 1) & mask_;
    }
  }

  bool lookup(std::uint64_t key, std::uint64_t& payload_out) const {
    NullMeter m;
    return lookup(key, payload_out, m);
  }

  std::uint64_t lookup_or_miss(std::uint64_t key) const {
    std::uint64_t v;
    return lookup(key, v) ? v : kMissValue;
  }

  void batch_lookup_scalar(std::span<const std::uint64_t> keys,
                           std::span<std::uint64_t> out) const {
    for (std::size_t i = 0; i < keys.size(); ++i) out[i] = lookup_or_miss(keys[i]);
  }

  ProbeStats measure_apcl(std::span<const std::uint64_t> keys) const {
    LineMeter meter;
    std::uint64_t v;
    for (std::uint64_t k : keys) lookup(k, v, meter);
    return meter.stats();
  }

  // Backward-shift deletion; no tombstones.
  bool erase(std::uint64_t key) {
    if (key == kEmptyKey) return false;
    std::size_t i = bucket_index(key);
    for (;;) {
      if (buckets_[i].key == kEmptyKey) return false;
      if (buckets_[i].key == key) break;
      i = (i + 1) & mask_;
    }
    std::size_t hole = i;
    std::size_t j = (i + 1) & mask_;
    while (buckets_[j].key != kEmptyKey) {
      std::size_t home = bucket_index(buckets_[j].key);
      // Move j into the hole if its home does not lie in (hole, j].
      bool between = hole <= j ? (home > hole && home <= j)
                               : (home > hole || home <= j);
      if (!between) {
        buckets_[hole] = buckets_[j];
        hole = j;
      }
      j = (j + 1) & mask_;
    }
    buckets_[hole] = Bucket{kEmptyKey, 0};
    --count_;
    return true;
  }

  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < cap_; ++i)
      if (buckets_[i].key != kEmptyKey) fn(buckets_[i].key, buckets_[i].slot);
  }

 private:
  AlignedPtr<Bucket> buckets_;
  std::size_t cap_ = 0, mask_ = 0, count_ = 0;
  TableConfig cfg_;

  std::size_t max_count() const noexcept {
    return static_cast<std::size_t>(cfg_.max_load_factor * static_cast<double>(cap_));
  }

  void init_arrays(std::size_t cap) {
    buckets_ = make_aligned_array<Bucket>(cap);
    for (std::size_t i = 0; i < cap; ++i) buckets_[i] = Bucket{kEmptyKey, 0};
    cap_ = cap;
    mask_ = cap - 1;
    count_ = 0;
  }

  void grow() {
    LinearProbingTable next(cap_ * 2, cfg_);
    for (std::size_t i = 0; i < cap_; ++i)
      if (buckets_[i].key != kEmptyKey) next.insert(buckets_[i].key, buckets_[i].slot);
    *this = std::move(next);
  }

 public:
  LinearProbingTable(LinearProbingTable&&) = default;
  LinearProbingTable& operator=(LinearProbingTable&&) = default;
};

// Collision-free pseudo-table: one hash, one random read, no key compare,
// no correctness guarantee. Defines the lookup throughput ceiling.
class RandomAccessTable {
 public:
  explicit RandomAccessTable(std::size_t min_capacity, TableConfig cfg = {}) : cfg_(cfg) {
    std::size_t cap = 16;
    while (cap < min_capacity) cap <<= 1;
    buckets_ = make_aligned_array<Bucket>(cap);
    for (std::size_t i = 0; i < cap; ++i) buckets_[i] = Bucket{0, 0};
    cap_ = cap;
    mask_ = cap - 1;
  }

  std::size_t capacity() const noexcept { return cap_; }
  std::size_t memory_bytes() const noexcept { return cap_ * sizeof(Bucket); }
  std::size_t bucket_index(std::uint64_t key) const noexcept {
    return seeded_hash(key, cfg_.seed) & mask_;
  }

  void insert(std::uint64_t key, std::uint64_t payload) noexcept {
    buckets_[bucket_index(key)] = Bucket{key, payload};
  }

  std::uint64_t lookup_unchecked(std::uint64_t key) const noexcept {
    return buckets_[bucket_index(key)].slot;
  }

  const Bucket* raw_buckets() const noexcept { return buckets_.get(); }
  std::size_t index_mask() const noexcept { return mask_; }
  std::uint64_t seed() const noexcept { return cfg_.seed; }

 private:
  AlignedPtr<Bucket> buckets_;
  std::size_t cap_ = 0, mask_ = 0;
  TableConfig cfg_;
};

}  // namespace nbh
