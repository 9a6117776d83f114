#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdint>
#include <span>
#include <vector>

#include "nbh/common.hpp"
#include "nbh/packed_slot.hpp"
#include "nbh/table.hpp"
#include "nbh/variants.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#define NBH_HAVE_AVX512 1
#else
#define NBH_HAVE_AVX512 0
#endif

namespace nbh {

enum class Engine { kScalar, kInterleaved, kVectorized, kAuto };

inline const char* engine_name(Engine e) {
  switch (e) {
    case Engine::kScalar: return "scalar";
    case Engine::kInterleaved: return "interleaved";
    case Engine::kVectorized: return "vectorized";
    default: return "auto";
  }
}

struct EngineConfig {
  Engine engine = Engine::kAuto;
  std::uint32_t group_size = 8;  // in-flight probe states, clamped to [1,32]
  std::size_t auto_threshold_bytes = 32u << 20;
  bool prefetch = true;
};

struct EngineStats {
  Engine used = Engine::kScalar;
  bool simd_fast_path = false;  // false when vectorized fell back
};

// ---------------------------------------------------------------------------
// Interleaved multi-probe lookup: up to G probe states advance round-robin,
// each issuing a prefetch for its next bucket before yielding, so chain
// walks overlap their memory latency. Results match the scalar path
// elementwise.
template <class Table>
void interleaved_batch_lookup(const Table& table, std::span<const std::uint64_t> keys,
                              std::span<std::uint64_t> out, const EngineConfig& cfg = {}) {
  static_assert(Table::kInlineLinks, "interleaved engine walks inline chains");
  const Bucket* buckets = table.raw_buckets();
  const std::size_t mask = table.index_mask();
  const std::uint64_t seed = table.seed();
  const std::size_t n = keys.size();
  const bool pf = cfg.prefetch;
  const std::uint32_t group = std::clamp<std::uint32_t>(cfg.group_size, 1, 32);

  struct State {
    std::uint64_t key;
    std::size_t pos;
    std::size_t out_idx;
    bool at_root;
  };
  std::array<State, 32> states;
  std::size_t next = 0;
  std::uint32_t live = 0;

  auto refill = [&](State& s) -> bool {
    while (next < n) {
      std::uint64_t k = keys[next];
      if (NBH_UNLIKELY(k == kEmptyKey)) {
        out[next++] = kMissValue;
        continue;
      }
      std::size_t j = seeded_hash(k, seed) & mask;
      if (pf) NBH_PREFETCH(&buckets[j]);
      s = State{k, j, next++, true};
      return true;
    }
    return false;
  };

  for (std::uint32_t i = 0; i < group; ++i) {
    if (!refill(states[live])) break;
    ++live;
  }

  std::uint32_t idx = 0;
  while (live > 0) {
    if (idx >= live) idx = 0;
    State& s = states[idx];
    const Bucket& b = buckets[s.pos];
    bool done = false;
    if (b.key == s.key) {
      out[s.out_idx] = PackedSlot{load_relaxed_u64(&b.slot)}.payload();
      done = true;
    } else if (s.at_root &&
               (b.key == kEmptyKey || (seeded_hash(b.key, seed) & mask) != s.pos)) {
      out[s.out_idx] = kMissValue;
      done = true;
    } else {
      PackedSlot slot{load_relaxed_u64(&b.slot)};
      if (!slot.has_next()) {
        out[s.out_idx] = kMissValue;
        done = true;
      } else {
        s.pos = static_cast<std::size_t>(static_cast<std::int64_t>(s.pos) +
                                         PackedSlot::decode_offset(slot.offset_code()));
        s.at_root = false;
        if (pf) NBH_PREFETCH(&buckets[s.pos]);
      }
    }
    if (done && !refill(s)) {
      states[idx] = states[live - 1];
      --live;
    } else {
      ++idx;
    }
  }
}

// ---------------------------------------------------------------------------
// Inter-query vectorized lookup (8 lanes of 64-bit state, gather probes,
// mask compaction to retire finished lanes and pull new queries). Falls
// back to the interleaved engine when the platform lacks the width; the
// fallback changes no results.
#if NBH_HAVE_AVX512
template <class Table>
bool vectorized_batch_lookup_fast(const Table& table, std::span<const std::uint64_t> keys,
                                  std::span<std::uint64_t> out) {
  static_assert(Table::kInlineLinks);
  const Bucket* buckets = table.raw_buckets();
  const std::size_t mask = table.index_mask();
  const std::uint64_t seed = table.seed();
  const std::size_t n = keys.size();

  alignas(64) std::uint64_t stage_key[8];
  alignas(64) std::uint64_t stage_pos[8];
  alignas(64) std::uint64_t stage_out[8];
  std::size_t next = 0;

  __m512i v_key = _mm512_setzero_si512();
  __m512i v_pos = _mm512_setzero_si512();
  __m512i v_out = _mm512_setzero_si512();
  __mmask8 live = 0;

  const __m512i v_payload_mask = _mm512_set1_epi64(PackedSlot::kPayloadMask);
  const __m512i v_4096 = _mm512_set1_epi64(4096);
  const __m512i v_2048 = _mm512_set1_epi64(2048);
  const __m512i v_miss = _mm512_set1_epi64(static_cast<long long>(kMissValue));

  for (;;) {
    // Compact surviving lanes to the bottom, then refill the tail lanes
    // from the pending key stream.
    int nlive = __builtin_popcount(live);
    if (nlive < 8 && next < n) {
      v_key = _mm512_maskz_compress_epi64(live, v_key);
      v_pos = _mm512_maskz_compress_epi64(live, v_pos);
      v_out = _mm512_maskz_compress_epi64(live, v_out);
      int fill = nlive;
      _mm512_store_si512(stage_key, v_key);
      _mm512_store_si512(stage_pos, v_pos);
      _mm512_store_si512(stage_out, v_out);
      while (fill < 8 && next < n) {
        std::uint64_t k = keys[next];
        if (NBH_UNLIKELY(k == kEmptyKey)) {
          out[next++] = kMissValue;
          continue;
        }
        stage_key[fill] = k;
        stage_pos[fill] = seeded_hash(k, seed) & mask;
        stage_out[fill] = next++;
        ++fill;
      }
      v_key = _mm512_load_si512(stage_key);
      v_pos = _mm512_load_si512(stage_pos);
      v_out = _mm512_load_si512(stage_out);
      live = static_cast<__mmask8>((1u << fill) - 1u);
      nlive = fill;
    }
    if (live == 0) break;

    // Gather bucket words: key at pos*16, slot at pos*16+8.
    __m512i v_byte = _mm512_slli_epi64(v_pos, 4);
    __m512i v_bkey = _mm512_mask_i64gather_epi64(
        v_miss, live, v_byte, reinterpret_cast<const long long*>(buckets), 1);
    __m512i v_slot = _mm512_mask_i64gather_epi64(
        v_miss, live, v_byte,
        reinterpret_cast<const long long*>(reinterpret_cast<const char*>(buckets) + 8), 1);

    __mmask8 m_hit = _mm512_mask_cmpeq_epu64_mask(live, v_bkey, v_key);
    __m512i v_code = _mm512_srli_epi64(v_slot, PackedSlot::kPayloadBits);
    __mmask8 m_end =
        _mm512_mask_cmpeq_epu64_mask(static_cast<__mmask8>(live & ~m_hit), v_code,
                                     _mm512_setzero_si512());

    if (m_hit) {
      __m512i v_payload = _mm512_and_si512(v_slot, v_payload_mask);
      _mm512_mask_i64scatter_epi64(out.data(), m_hit, v_out, v_payload, 8);
    }
    if (m_end) {
      _mm512_mask_i64scatter_epi64(out.data(), m_end, v_out, v_miss, 8);
    }
    live = static_cast<__mmask8>(live & ~(m_hit | m_end));

    // Survivors advance by the decoded offset: code > 2048 means code-4096.
    __mmask8 m_neg = _mm512_mask_cmpgt_epu64_mask(live, v_code, v_2048);
    __m512i v_delta = _mm512_mask_sub_epi64(v_code, m_neg, v_code, v_4096);
    v_pos = _mm512_mask_add_epi64(v_pos, live, v_pos, v_delta);
  }
  return true;
}
#endif  // NBH_HAVE_AVX512

template <class Table>
EngineStats vectorized_batch_lookup(const Table& table, std::span<const std::uint64_t> keys,
                                    std::span<std::uint64_t> out,
                                    const EngineConfig& cfg = {}) {
  EngineStats st;
  st.used = Engine::kVectorized;
#if NBH_HAVE_AVX512
  (void)cfg;
  st.simd_fast_path = vectorized_batch_lookup_fast(table, keys, out);
#else
  st.simd_fast_path = false;
  interleaved_batch_lookup(table, keys, out, cfg);
#endif
  return st;
}

// Engine dispatch. kAuto picks the vectorized path for tables that fit the
// cache-resident regime and the interleaved path above the threshold.
template <class Table>
EngineStats batch_lookup(const Table& table, std::span<const std::uint64_t> keys,
                         std::span<std::uint64_t> out, const EngineConfig& cfg = {}) {
  Engine e = cfg.engine;
  if (e == Engine::kAuto)
    e = table.memory_bytes() <= cfg.auto_threshold_bytes ? Engine::kVectorized
                                                         : Engine::kInterleaved;
  EngineStats st;
  st.used = e;
  switch (e) {
    case Engine::kScalar:
      table.batch_lookup_scalar(keys, out);
      break;
    case Engine::kInterleaved:
      interleaved_batch_lookup(table, keys, out, cfg);
      break;
    default:
      return vectorized_batch_lookup(table, keys, out, cfg);
  }
  return st;
}

// ---------------------------------------------------------------------------
// Random-access ceiling: hash + one unchecked read per key.
inline void ra_scalar_lookup(const RandomAccessTable& t, std::span<const std::uint64_t> keys,
                             std::span<std::uint64_t> out) {
  for (std::size_t i = 0; i < keys.size(); ++i) out[i] = t.lookup_unchecked(keys[i]);
}

inline void ra_interleaved_lookup(const RandomAccessTable& t,
                                  std::span<const std::uint64_t> keys,
                                  std::span<std::uint64_t> out, std::uint32_t group_size = 8) {
  const Bucket* buckets = t.raw_buckets();
  const std::size_t mask = t.index_mask();
  const std::uint64_t seed = t.seed();
  const std::size_t n = keys.size();
  const std::uint32_t group = std::clamp<std::uint32_t>(group_size, 1, 32);
  std::array<std::pair<std::size_t, std::size_t>, 32> pending;  // (bucket, out index)
  std::size_t next = 0;
  std::uint32_t live = 0;
  for (; live < group && next < n; ++next, ++live) {
    std::size_t j = seeded_hash(keys[next], seed) & mask;
    NBH_PREFETCH(&buckets[j]);
    pending[live] = {j, next};
  }
  std::uint32_t idx = 0;
  while (live > 0) {
    if (idx >= live) idx = 0;
    auto [j, oi] = pending[idx];
    out[oi] = buckets[j].slot;
    if (next < n) {
      std::size_t nj = seeded_hash(keys[next], seed) & mask;
      NBH_PREFETCH(&buckets[nj]);
      pending[idx] = {nj, next++};
      ++idx;
    } else {
      pending[idx] = pending[live - 1];
      --live;
    }
  }
}

// ---------------------------------------------------------------------------
// Wall-clock throughput: warm run, then the median of `reps` timed runs.
struct ThroughputResult {
  double mops = 0.0;
  double seconds_median = 0.0;
  int repetitions = 0;
};

template <class RunFn>
ThroughputResult measure_mops(std::size_t ops_per_run, RunFn&& run, int reps = 5) {
  using clock = std::chrono::steady_clock;
  if (reps < 3) reps = 3;
  run();  // warm
  std::vector<double> secs(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    auto t0 = clock::now();
    run();
    auto t1 = clock::now();
    secs[static_cast<std::size_t>(r)] = std::chrono::duration<double>(t1 - t0).count();
  }
  std::sort(secs.begin(), secs.end());
  double med = secs[secs.size() / 2];
  ThroughputResult res;
  res.seconds_median = med;
  res.repetitions = reps;
  res.mops = med > 0 ? static_cast<double>(ops_per_run) / med / 1e6 : 0.0;
  return res;
}

}  // namespace nbh
