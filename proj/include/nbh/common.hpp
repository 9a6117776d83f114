#pragma once

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <stdexcept>

#if defined(__GNUC__) || defined(__clang__)
#define NBH_LIKELY(x) (__builtin_expect(!!(x), 1))
#define NBH_UNLIKELY(x) (__builtin_expect(!!(x), 0))
#define NBH_PREFETCH(addr) __builtin_prefetch((addr), 0, 3)
#else
#define NBH_LIKELY(x) (x)
#define NBH_UNLIKELY(x) (x)
#define NBH_PREFETCH(addr) ((void)0)
#endif

namespace nbh {

inline constexpr std::size_t kCachelineBytes = 64;

// Reserved sentinel: marks an empty bucket. Inserting it is rejected.
inline constexpr std::uint64_t kEmptyKey = ~0ull;

// Miss marker in batch result vectors. Payloads are < 2^52, so this value
// can never collide with a stored payload.
inline constexpr std::uint64_t kMissValue = ~0ull;

// 64-bit avalanche finalizer (murmur3 fmix64 constants).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdull;
  x ^= x >> 33;
  x *= 0xc4ceb9fe1a85ec53ull;
  x ^= x >> 33;
  return x;
}

constexpr std::uint64_t seeded_hash(std::uint64_t key, std::uint64_t seed) noexcept {
  return mix64(key + 0x9e3779b97f4a7c15ull * (seed | 1));
}

struct FreeDeleter {
  void operator()(void* p) const noexcept { std::free(p); }
};

template <class T>
using AlignedPtr = std::unique_ptr<T[], FreeDeleter>;

// Cacheline-aligned uninitialized array.
template <class T>
AlignedPtr<T> make_aligned_array(std::size_t n, std::size_t align = kCachelineBytes) {
  std::size_t bytes = n * sizeof(T);
  bytes = (bytes + align - 1) / align * align;
  void* p = std::aligned_alloc(align, bytes);
  if (!p) throw std::bad_alloc();
  return AlignedPtr<T>(static_cast<T*>(p));
}

// Word-sized atomic accessors over plain storage. Slot words of a published
// table are flipped in place by the tiered store while readers walk chains,
// so every slot read on a shared path goes through these.
inline std::uint64_t load_relaxed_u64(const std::uint64_t* p) noexcept {
  return __atomic_load_n(p, __ATOMIC_RELAXED);
}
inline std::uint64_t load_acquire_u64(const std::uint64_t* p) noexcept {
  return __atomic_load_n(p, __ATOMIC_ACQUIRE);
}
inline void store_release_u64(std::uint64_t* p, std::uint64_t v) noexcept {
  __atomic_store_n(p, v, __ATOMIC_RELEASE);
}
inline bool cas_u64(std::uint64_t* p, std::uint64_t& expected, std::uint64_t desired) noexcept {
  return __atomic_compare_exchange_n(p, &expected, desired, false, __ATOMIC_ACQ_REL,
                                     __ATOMIC_ACQUIRE);
}

// Keeps the optimizer from discarding benchmark results.
template <class T>
inline void do_not_optimize(T const& value) {
#if defined(__GNUC__) || defined(__clang__)
  asm volatile("" : : "g"(value) : "memory");
#else
  volatile T sink = value;
  (void)sink;
#endif
}

}  // namespace nbh
