#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nbh/common.hpp"
#include "nbh/packed_slot.hpp"
#include "nbh/probe_meter.hpp"

namespace nbh {

// Flat-array coalesced hashing for 64-bit keys and 52-bit payloads with
// lodger relocation: the bucket at a key's hash index always holds a record
// of that key's own chain (the host), so a lookup never walks a foreign
// chain. Chains are linked by relative bucket offsets.
//
// Policy axes cover the ablation ladder:
//   FreeSearch::kCachelineBidir  - free buckets found in the anchor's own
//                                  cacheline first, then nearest in either
//                                  direction (ties break forward).
//   FreeSearch::kForwardScan     - first free bucket scanning forward only.
//   FreeSearch::kRovingCursor    - descending allocation cursor, i.e. the
//                                  classic "cellar" placement done lazily.
//   LinkMode::kInline            - 12-bit offset packed into the value word.
//   LinkMode::kSideArray         - full-width link in a separate array.

enum class FreeSearch { kCachelineBidir, kForwardScan, kRovingCursor };
enum class LinkMode { kInline, kSideArray };

struct TableConfig {
  double max_load_factor = 0.8;
  std::uint64_t seed = 0x5bd1e995u;
  bool head_anchor = false;  // probe around the chain head instead of the tail
  int relocation_budget = 16;
};

struct InsertOutcome {
  bool updated = false;  // key existed, payload overwritten
  int growths = 0;       // number of grow() calls this insert triggered
};

struct GrowthStats {
  std::uint64_t load_factor_growths = 0;
  std::uint64_t encoding_growths = 0;  // no encodable free bucket reachable
};

struct Bucket {
  std::uint64_t key;
  std::uint64_t slot;  // PackedSlot::raw
};
static_assert(sizeof(Bucket) == 16, "4 buckets per 64-byte cacheline");

inline constexpr std::uint32_t kNoLink = ~0u;  // side-array chain terminator

template <FreeSearch kSearch, LinkMode kLinks>
class ChainedTable {
 public:
  static constexpr bool kInlineLinks = (kLinks == LinkMode::kInline);
  static constexpr std::size_t kMinCapacity = 16;

  explicit ChainedTable(std::size_t min_capacity = kMinCapacity, TableConfig cfg = {})
      : cfg_(cfg) {
    if (cfg_.max_load_factor <= 0.0 || cfg_.max_load_factor > 1.0)
      throw std::invalid_argument("max_load_factor out of (0,1]");
    std::size_t cap = kMinCapacity;
    while (cap < min_capacity) cap <<= 1;
    init_arrays(cap);
  }

  std::size_t size() const noexcept { return count_; }
  std::size_t capacity() const noexcept { return cap_; }
  double load_factor() const noexcept {
    return static_cast<double>(count_) / static_cast<double>(cap_);
  }
  std::uint64_t seed() const noexcept { return cfg_.seed; }
  const TableConfig& config() const noexcept { return cfg_; }
  const GrowthStats& growth_stats() const noexcept { return growth_stats_; }
  std::size_t memory_bytes() const noexcept {
    return cap_ * sizeof(Bucket) + (kInlineLinks ? 0 : cap_ * sizeof(std::uint32_t));
  }

  std::size_t bucket_index(std::uint64_t key) const noexcept {
    return seeded_hash(key, cfg_.seed) & mask_;
  }

  const Bucket* raw_buckets() const noexcept { return buckets_.get(); }
  std::size_t index_mask() const noexcept { return mask_; }

  InsertOutcome insert(std::uint64_t key, std::uint64_t payload) {
    if (NBH_UNLIKELY(key == kEmptyKey))
      throw std::invalid_argument("reserved sentinel key");
    if (NBH_UNLIKELY(payload > PackedSlot::kPayloadMask))
      throw std::invalid_argument("payload exceeds 52 bits");
    InsertOutcome out;
    std::size_t idx;
    if (find_index(key, idx)) {
      // Overwrite: payload bits only, structure untouched.
      buckets_[idx].slot = PackedSlot{buckets_[idx].slot}.with_payload(payload).raw;
      out.updated = true;
      return out;
    }
    if (count_ + 1 > max_count()) {
      grow_internal();
      ++growth_stats_.load_factor_growths;
      ++out.growths;
    }
    bool updated = false;
    while (!try_insert(key, payload, updated)) {
      grow_internal();
      ++growth_stats_.encoding_growths;
      ++out.growths;
    }
    ++count_;
    return out;
  }

  template <class Meter = NullMeter>
  bool lookup(std::uint64_t key, std::uint64_t& payload_out, Meter& meter) const {
    if (NBH_UNLIKELY(key == kEmptyKey)) {
      meter.finish(false);
      return false;
    }
    std::size_t j = bucket_index(key);
    const Bucket* b = &buckets_[j];
    meter.touch(b);
    if (b->key == key) {
      payload_out = PackedSlot{load_relaxed_u64(&b->slot)}.payload();
      meter.finish(true);
      return true;
    }
    if (b->key == kEmptyKey || bucket_index(b->key) != j) {
      meter.finish(false);
      return false;  // empty root or a lodger: no chain hashes here
    }
    std::size_t cur = j;
    if constexpr (kInlineLinks) {
      // The offset rides in the value word: one load per visited bucket.
      PackedSlot s{load_relaxed_u64(&b->slot)};
      for (;;) {
        if (!s.has_next()) {
          meter.finish(false);
          return false;
        }
        cur = static_cast<std::size_t>(static_cast<std::int64_t>(cur) +
                                       PackedSlot::decode_offset(s.offset_code()));
        b = &buckets_[cur];
        meter.touch(b);
        s = PackedSlot{load_relaxed_u64(&b->slot)};
        if (b->key == key) {
          payload_out = s.payload();
          meter.finish(true);
          return true;
        }
      }
    } else {
      for (;;) {
        std::uint32_t link = read_link(cur, meter);
        if (link_is_end(link)) {
          meter.finish(false);
          return false;
        }
        cur = advance(cur, link);
        b = &buckets_[cur];
        meter.touch(b);
        if (b->key == key) {
          payload_out = PackedSlot{load_relaxed_u64(&b->slot)}.payload();
          meter.finish(true);
          return true;
        }
      }
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

  std::vector<std::uint64_t> batch_lookup_scalar(std::span<const std::uint64_t> keys) const {
    std::vector<std::uint64_t> out(keys.size());
    batch_lookup_scalar(keys, out);
    return out;
  }

  ProbeStats measure_apcl(std::span<const std::uint64_t> keys) const {
    LineMeter meter;
    std::uint64_t v;
    for (std::uint64_t k : keys) lookup(k, v, meter);
    return meter.stats();
  }

  bool erase(std::uint64_t key) {
    if (key == kEmptyKey) return false;
    std::size_t j = bucket_index(key);
    Bucket& root = buckets_[j];
    if (root.key == kEmptyKey) return false;
    if (root.key != key && bucket_index(root.key) != j) return false;

    std::size_t prev = j, cur = j;
    if (root.key != key) {
      for (;;) {
        std::uint32_t link = read_link_plain(cur);
        if (link_is_end(link)) return false;
        prev = cur;
        cur = advance(cur, link);
        if (buckets_[cur].key == key) break;
      }
    }

    std::uint32_t cur_link = read_link_plain(cur);
    bool has_succ = !link_is_end(cur_link);
    if (cur == j) {
      if (!has_succ) {
        clear_bucket(j);
        --count_;
        return true;
      }
      // Promote the first successor into the root bucket.
      std::size_t s = advance(j, cur_link);
      std::uint32_t s_link = read_link_plain(s);
      if (link_is_end(s_link)) {
        set_record(j, buckets_[s].key, PackedSlot{buckets_[s].slot}.payload(), kNoLink);
        clear_bucket(s);
        --count_;
        return true;
      }
      std::size_t s2 = advance(s, s_link);
      if (link_representable(j, s2)) {
        set_record(j, buckets_[s].key, PackedSlot{buckets_[s].slot}.payload(),
                   make_link(j, s2));
        clear_bucket(s);
        --count_;
        return true;
      }
      rebuild_chain_without(j, key);
      return true;
    }
    if (!has_succ) {
      write_link(prev, kNoLink);
      clear_bucket(cur);
      --count_;
      return true;
    }
    std::size_t s = advance(cur, cur_link);
    if (link_representable(prev, s)) {
      write_link(prev, make_link(prev, s));
      clear_bucket(cur);
      --count_;
      return true;
    }
    rebuild_chain_without(j, key);
    return true;
  }

  void grow() { grow_internal(); }

  // Free-bucket search as used by insertion, anchored at `anchor` (which is
  // also the bucket that would store the link). kNoFreeBucket when nothing
  // encodable is reachable.
  static constexpr std::size_t kNoFreeBucket = ~std::size_t{0};
  std::size_t find_free_neighbor(std::size_t anchor) {
    return find_free(anchor, anchor);
  }

  // Scan-order iteration over stored (key, payload) pairs.
  template <class Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < cap_; ++i)
      if (buckets_[i].key != kEmptyKey)
        fn(buckets_[i].key, PackedSlot{buckets_[i].slot}.payload());
  }

  // Acquire view of a value word; used by readers that run concurrently
  // with payload flips (tiered store).
  std::uint64_t load_slot_atomic(std::size_t i) const noexcept {
    return load_acquire_u64(&buckets_[i].slot);
  }

  // Atomic payload read for one key. Returns false on miss.
  bool lookup_payload_atomic(std::uint64_t key, std::uint64_t& payload_out) const {
    std::size_t i;
    if (!find_index(key, i)) return false;
    payload_out = PackedSlot{load_slot_atomic(i)}.payload();
    return true;
  }

  // Atomically replaces the payload of an existing key, preserving the
  // chain offset bits. Returns false if the key is absent.
  bool update_payload_atomic(std::uint64_t key, std::uint64_t payload) {
    std::size_t i;
    if (!find_index(key, i)) return false;
    std::uint64_t cur = load_acquire_u64(&buckets_[i].slot);
    for (;;) {
      std::uint64_t next = PackedSlot{cur}.with_payload(payload).raw;
      if (cas_u64(&buckets_[i].slot, cur, next)) return true;
    }
  }

  // CAS on the payload bits of an existing key. Fails (returns false) if
  // the key is absent or its current payload differs from `expected`.
  bool cas_payload_atomic(std::uint64_t key, std::uint64_t expected, std::uint64_t desired) {
    std::size_t i;
    if (!find_index(key, i)) return false;
    std::uint64_t cur = load_acquire_u64(&buckets_[i].slot);
    for (;;) {
      PackedSlot ps{cur};
      if (ps.payload() != expected) return false;
      std::uint64_t next = ps.with_payload(desired).raw;
      if (cas_u64(&buckets_[i].slot, cur, next)) return true;
    }
  }

  // Full-table structural validation: chain-root host invariant, chain
  // partition (every occupied bucket visited exactly once by walking all
  // host chains), link ranges. Test helper; O(capacity).
  bool check_invariants(std::string* err = nullptr) const {
    auto fail = [&](const char* msg) {
      if (err) *err = msg;
      return false;
    };
    std::vector<bool> seen(cap_, false);
    std::size_t visited = 0, occupied = 0;
    for (std::size_t i = 0; i < cap_; ++i) {
      if (buckets_[i].key == kEmptyKey) continue;
      ++occupied;
      std::size_t r = bucket_index(buckets_[i].key);
      if (buckets_[r].key == kEmptyKey) return fail("chain root is empty");
      if (bucket_index(buckets_[r].key) != r) return fail("chain root holds a lodger");
    }
    if (occupied != count_) return fail("count mismatch");
    for (std::size_t i = 0; i < cap_; ++i) {
      if (buckets_[i].key == kEmptyKey) continue;
      if (bucket_index(buckets_[i].key) != i) continue;  // host roots only
      std::size_t cur = i, steps = 0;
      for (;;) {
        if (seen[cur]) return fail("bucket on two chains or cycle");
        seen[cur] = true;
        ++visited;
        if (bucket_index(buckets_[cur].key) != i) return fail("chain crosses hash index");
        std::uint32_t link = read_link_plain(cur);
        if (link_is_end(link)) break;
        if constexpr (kInlineLinks) {
          std::int64_t d = PackedSlot::decode_offset(link);
          if (!PackedSlot::offset_encodable(d)) return fail("offset out of range");
          std::int64_t nxt = static_cast<std::int64_t>(cur) + d;
          if (nxt < 0 || nxt >= static_cast<std::int64_t>(cap_))
            return fail("offset leaves table");
        }
        cur = advance(cur, link);
        if (buckets_[cur].key == kEmptyKey) return fail("chain links to empty bucket");
        if (++steps > count_) return fail("chain longer than table");
      }
    }
    if (visited != occupied) return fail("orphan bucket reachable from no chain");
    return true;
  }

 private:
  AlignedPtr<Bucket> buckets_;
  AlignedPtr<std::uint32_t> side_;  // only allocated in side-array mode
  std::size_t cap_ = 0;
  std::size_t mask_ = 0;
  std::size_t count_ = 0;
  std::size_t roving_ = 0;  // descending allocation cursor (kRovingCursor)
  TableConfig cfg_;
  GrowthStats growth_stats_;

  std::size_t max_count() const noexcept {
    return static_cast<std::size_t>(cfg_.max_load_factor * static_cast<double>(cap_));
  }

  void init_arrays(std::size_t cap) {
    buckets_ = make_aligned_array<Bucket>(cap);
    for (std::size_t i = 0; i < cap; ++i) buckets_[i] = Bucket{kEmptyKey, 0};
    if constexpr (!kInlineLinks) {
      side_ = make_aligned_array<std::uint32_t>(cap);
      for (std::size_t i = 0; i < cap; ++i) side_[i] = kNoLink;
    }
    cap_ = cap;
    mask_ = cap - 1;
    count_ = 0;
    roving_ = cap - 1;
  }

  // --- link plumbing -------------------------------------------------------

  // Links are surfaced uniformly as a uint32 "link code": kNoLink / 0 for
  // end-of-chain, otherwise either an inline offset code or an absolute
  // side-array index.
  bool link_is_end(std::uint32_t link) const noexcept {
    if constexpr (kInlineLinks) return link == 0;
    else return link == kNoLink;
  }

  std::size_t advance(std::size_t from, std::uint32_t link) const noexcept {
    if constexpr (kInlineLinks)
      return static_cast<std::size_t>(static_cast<std::int64_t>(from) +
                                      PackedSlot::decode_offset(link));
    else
      return link;
  }

  template <class Meter>
  std::uint32_t read_link(std::size_t i, Meter& meter) const noexcept {
    if constexpr (kInlineLinks) {
      (void)meter;  // offset lives in the already-touched value word
      return PackedSlot{buckets_[i].slot}.offset_code();
    } else {
      meter.touch(&side_[i]);
      return side_[i];
    }
  }

  std::uint32_t read_link_plain(std::size_t i) const noexcept {
    if constexpr (kInlineLinks)
      return PackedSlot{buckets_[i].slot}.offset_code();
    else
      return side_[i];
  }

  bool link_representable(std::size_t from, std::size_t to) const noexcept {
    if constexpr (kInlineLinks)
      return PackedSlot::offset_encodable(static_cast<std::int64_t>(to) -
                                          static_cast<std::int64_t>(from));
    else
      return true;
  }

  std::uint32_t make_link(std::size_t from, std::size_t to) const noexcept {
    if constexpr (kInlineLinks)
      return PackedSlot::encode_offset(static_cast<std::int64_t>(to) -
                                       static_cast<std::int64_t>(from));
    else
      return static_cast<std::uint32_t>(to);
  }

  void write_link(std::size_t i, std::uint32_t link) noexcept {
    if constexpr (kInlineLinks)
      buckets_[i].slot = PackedSlot{buckets_[i].slot}.with_offset(link == kNoLink ? 0 : link).raw;
    else
      side_[i] = link;
  }

  void set_record(std::size_t i, std::uint64_t key, std::uint64_t payload,
                  std::uint32_t link) noexcept {
    buckets_[i].key = key;
    if constexpr (kInlineLinks) {
      buckets_[i].slot = PackedSlot::make(link == kNoLink ? 0 : link, payload).raw;
    } else {
      buckets_[i].slot = PackedSlot::make(0, payload).raw;
      side_[i] = link;
    }
  }

  void clear_bucket(std::size_t i) noexcept {
    buckets_[i] = Bucket{kEmptyKey, 0};
    if constexpr (!kInlineLinks) side_[i] = kNoLink;
  }

  bool find_index(std::uint64_t key, std::size_t& out) const {
    if (key == kEmptyKey) return false;
    std::size_t j = bucket_index(key);
    if (buckets_[j].key == key) {
      out = j;
      return true;
    }
    if (buckets_[j].key == kEmptyKey || bucket_index(buckets_[j].key) != j) return false;
    std::size_t cur = j;
    for (;;) {
      std::uint32_t link = read_link_plain(cur);
      if (link_is_end(link)) return false;
      cur = advance(cur, link);
      if (buckets_[cur].key == key) {
        out = cur;
        return true;
      }
    }
  }

  // --- free-bucket search ---------------------------------------------------

  // Relocation plan entry: move the record at `from` to `to`; `succ_to`
  // is the final position of its chain successor (kNoPos if none).
  static constexpr std::size_t kNoPos = ~std::size_t{0};
  struct Move {
    std::size_t from, to;
    std::size_t succ_to = kNoPos;
  };

  // Small overlay of tentative occupancy used while planning relocations.
  struct Overlay {
    std::vector<std::pair<std::size_t, bool>> entries;  // (index, occupied)
    const bool* lookup(std::size_t i) const {
      for (auto& e : entries)
        if (e.first == i) return &e.second;
      return nullptr;
    }
    void set(std::size_t i, bool occupied) {
      for (auto& e : entries)
        if (e.first == i) {
          e.second = occupied;
          return;
        }
      entries.push_back({i, occupied});
    }
  };

  bool is_free(std::size_t i, const Overlay* ov) const noexcept {
    if (ov)
      if (const bool* o = ov->lookup(i)) return !*o;
    return buckets_[i].key == kEmptyKey;
  }

  // A candidate must be free and, in inline mode, encodable from the bucket
  // that will store the link to it.
  bool candidate_ok(std::size_t c, std::size_t link_from, const Overlay* ov) const noexcept {
    return is_free(c, ov) && link_representable(link_from, c);
  }

  // Nearest free bucket around `anchor` whose link from `link_from` is
  // representable. kNoPos when none exists.
  std::size_t find_free(std::size_t anchor, std::size_t link_from,
                        const Overlay* ov = nullptr) noexcept {
    if constexpr (kSearch == FreeSearch::kRovingCursor) {
      return find_free_roving(ov);
    } else if constexpr (kSearch == FreeSearch::kForwardScan) {
      for (std::size_t c = anchor + 1; c < cap_; ++c) {
        if (!link_representable(link_from, c)) break;
        if (is_free(c, ov)) return c;
      }
      return kNoPos;
    } else {
      return find_free_bidir(anchor, link_from, ov);
    }
  }

  std::size_t find_free_bidir(std::size_t anchor, std::size_t link_from,
                              const Overlay* ov) const noexcept {
    constexpr std::size_t kPerLine = kCachelineBytes / sizeof(Bucket);
    const std::size_t line_lo = anchor & ~(kPerLine - 1);
    const std::size_t line_hi = line_lo + kPerLine - 1;
    // Same cacheline first, by distance, forward on ties.
    for (std::size_t d = 1; d < kPerLine; ++d) {
      std::size_t fwd = anchor + d;
      if (fwd <= line_hi && fwd < cap_ && candidate_ok(fwd, link_from, ov)) return fwd;
      if (anchor >= d) {
        std::size_t bwd = anchor - d;
        if (bwd >= line_lo && candidate_ok(bwd, link_from, ov)) return bwd;
      }
    }
    // Expand outward; skip candidates already covered by the cacheline pass.
    const std::int64_t a = static_cast<std::int64_t>(anchor);
    const std::int64_t lf = static_cast<std::int64_t>(link_from);
    bool fwd_open = true, bwd_open = true;
    for (std::int64_t d = 1; fwd_open || bwd_open; ++d) {
      std::int64_t fwd = a + d;
      if (fwd_open) {
        if (fwd >= static_cast<std::int64_t>(cap_) ||
            (kInlineLinks && fwd - lf > PackedSlot::kMaxForward))
          fwd_open = false;
        else if (static_cast<std::size_t>(fwd) > line_hi &&
                 candidate_ok(static_cast<std::size_t>(fwd), link_from, ov))
          return static_cast<std::size_t>(fwd);
      }
      std::int64_t bwd = a - d;
      if (bwd_open) {
        if (bwd < 0 || (kInlineLinks && lf - bwd > PackedSlot::kMaxBackward))
          bwd_open = false;
        else if (static_cast<std::size_t>(bwd) < line_lo &&
                 candidate_ok(static_cast<std::size_t>(bwd), link_from, ov))
          return static_cast<std::size_t>(bwd);
      }
    }
    return kNoPos;
  }

  std::size_t find_free_roving(const Overlay* ov) noexcept {
    // Descending cursor; the wrap-around sweep picks up buckets freed above it.
    std::size_t c = roving_;
    for (std::size_t scanned = 0; scanned < cap_; ++scanned) {
      if (is_free(c, ov)) {
        roving_ = c == 0 ? cap_ - 1 : c - 1;
        return c;
      }
      c = c == 0 ? cap_ - 1 : c - 1;
    }
    return kNoPos;
  }

  // --- insert ---------------------------------------------------------------

  bool try_insert(std::uint64_t key, std::uint64_t payload, bool& updated) {
    std::size_t j = bucket_index(key);
    Bucket& root = buckets_[j];
    if (root.key == kEmptyKey) {
      set_record(j, key, payload, kNoLink);
      return true;
    }
    if (root.key == key) {
      root.slot = PackedSlot{root.slot}.with_payload(payload).raw;
      updated = true;
      return true;
    }
    if (bucket_index(root.key) == j) {
      // Host chain: overwrite if present, else append at the tail.
      std::size_t cur = j;
      for (;;) {
        std::uint32_t link = read_link_plain(cur);
        if (link_is_end(link)) break;
        cur = advance(cur, link);
        if (buckets_[cur].key == key) {
          buckets_[cur].slot = PackedSlot{buckets_[cur].slot}.with_payload(payload).raw;
          updated = true;
          return true;
        }
      }
      std::size_t anchor = cfg_.head_anchor ? j : cur;
      std::size_t nb = find_free(anchor, cur);
      if (nb == kNoPos) return false;
      set_record(nb, key, payload, kNoLink);
      write_link(cur, make_link(cur, nb));
      return true;
    }
    // A lodger occupies the new key's root: move it out, then take the root.
    if (!relocate_out(j)) return false;
    set_record(j, key, payload, kNoLink);
    return true;
  }

  // Moves the lodger at `pos` (plus any chain segment whose links would
  // become unrepresentable) to free buckets near its chain predecessor.
  bool relocate_out(std::size_t pos) {
    std::size_t r = bucket_index(buckets_[pos].key);
    std::size_t pred = r;
    while (true) {
      std::uint32_t link = read_link_plain(pred);
      std::size_t nxt = advance(pred, link);
      if (nxt == pos) break;
      pred = nxt;
    }
    std::vector<Move> plan;
    Overlay ov;
    ov.set(pos, true);  // reserved for the incoming host
    std::size_t moved_to;
    if (!plan_relocation(pos, pred, cfg_.relocation_budget, plan, ov, moved_to))
      return false;
    // Commit in plan order: every target is free by the time it is written.
    for (const Move& m : plan) {
      const Bucket src = buckets_[m.from];
      std::uint32_t link =
          m.succ_to == kNoPos ? kNoLink : make_link(m.to, m.succ_to);
      clear_bucket(m.from);
      set_record(m.to, src.key, PackedSlot{src.slot}.payload(), link);
    }
    write_link(pred, make_link(pred, moved_to));
    return true;
  }

  bool plan_relocation(std::size_t node, std::size_t pred_final, int budget,
                       std::vector<Move>& plan, Overlay& ov, std::size_t& placed_at) {
    if (budget <= 0) return false;
    std::size_t t = find_free(pred_final, pred_final, &ov);
    if (t == kNoPos) return false;
    std::uint32_t link = read_link_plain(node);
    bool has_succ = !link_is_end(link);
    std::size_t succ = has_succ ? advance(node, link) : kNoPos;

    plan.push_back(Move{node, t, kNoPos});
    std::size_t my_index = plan.size() - 1;
    ov.set(t, true);
    // The evicted lodger's own source stays reserved for the incoming host
    // (set by the caller); every deeper source is free in the final layout.
    if (my_index != 0) ov.set(node, false);
    placed_at = t;
    if (!has_succ) return true;
    if (link_representable(t, succ)) {
      plan[my_index].succ_to = succ;
      return true;
    }
    std::size_t succ_final;
    if (!plan_relocation(succ, t, budget - 1, plan, ov, succ_final)) return false;
    plan[my_index].succ_to = succ_final;
    return true;
  }

  // --- erase fallback / growth ---------------------------------------------

  // Collects the chain rooted at j, clears it, and reinserts everything but
  // `skip_key`. Used when a direct unlink would need an unrepresentable
  // offset.
  void rebuild_chain_without(std::size_t j, std::uint64_t skip_key) {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> records;
    std::size_t cur = j;
    for (;;) {
      records.emplace_back(buckets_[cur].key, PackedSlot{buckets_[cur].slot}.payload());
      std::uint32_t link = read_link_plain(cur);
      std::size_t nxt = link_is_end(link) ? kNoPos : advance(cur, link);
      clear_bucket(cur);
      if (nxt == kNoPos) break;
      cur = nxt;
    }
    count_ -= records.size();
    for (auto& [k, p] : records) {
      if (k == skip_key) continue;
      bool updated = false;
      while (!try_insert(k, p, updated)) {
        grow_internal();
        ++growth_stats_.encoding_growths;
      }
      ++count_;
    }
  }

  void grow_internal() {
    std::size_t newcap = cap_ * 2;
    for (;;) {
      ChainedTable next(newcap, cfg_);
      bool ok = true;
      for (std::size_t i = 0; i < cap_ && ok; ++i) {
        if (buckets_[i].key == kEmptyKey) continue;
        bool updated = false;
        if (!next.try_insert(buckets_[i].key, PackedSlot{buckets_[i].slot}.payload(),
                             updated))
          ok = false;
        else
          ++next.count_;
      }
      if (ok) {
        buckets_ = std::move(next.buckets_);
        side_ = std::move(next.side_);
        cap_ = next.cap_;
        mask_ = next.mask_;
        count_ = next.count_;
        roving_ = next.roving_;
        return;
      }
      newcap *= 2;
    }
  }
};

// The full design: lodger relocation + cacheline-aware bidirectional
// probing + inline 12-bit chaining.
using NeighborHash = ChainedTable<FreeSearch::kCachelineBidir, LinkMode::kInline>;

// Ablation rungs.
using NeighborProbingTable =
    ChainedTable<FreeSearch::kCachelineBidir, LinkMode::kSideArray>;
using PerfectCellarTable =
    ChainedTable<FreeSearch::kRovingCursor, LinkMode::kSideArray>;
using LinearRelocationTable =
    ChainedTable<FreeSearch::kForwardScan, LinkMode::kInline>;

}  // namespace nbh
