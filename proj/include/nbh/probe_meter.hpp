#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "nbh/common.hpp"

namespace nbh {

struct ProbeStats {
  std::uint64_t lookups = 0;
  std::uint64_t hits = 0;
  std::uint64_t cachelines_touched = 0;  // summed over successful lookups only

  // Undefined when no lookup succeeded.
  std::optional<double> apcl() const {
    if (hits == 0) return std::nullopt;
    return static_cast<double>(cachelines_touched) / static_cast<double>(hits);
  }
};

// No-op meter compiled into the hot path.
struct NullMeter {
  static constexpr bool kEnabled = false;
  void touch(const void*) noexcept {}
  void finish(bool) noexcept {}
};

// Counts distinct 64-byte-aligned lines read per lookup. Used only by the
// metered APCL path; plain lookups take NullMeter.
class LineMeter {
 public:
  static constexpr bool kEnabled = true;

  void touch(const void* p) noexcept {
    std::uint64_t line = reinterpret_cast<std::uintptr_t>(p) / kCachelineBytes;
    for (int i = 0; i < n_; ++i)
      if (lines_[i] == line) return;
    if (n_ < kMaxLines) lines_[n_++] = line;
  }

  void finish(bool hit) noexcept {
    ++stats_.lookups;
    if (hit) {
      ++stats_.hits;
      stats_.cachelines_touched += static_cast<std::uint64_t>(n_);
    }
    n_ = 0;
  }

  const ProbeStats& stats() const noexcept { return stats_; }

 private:
  static constexpr int kMaxLines = 128;
  std::array<std::uint64_t, kMaxLines> lines_{};
  int n_ = 0;
  ProbeStats stats_;
};

}  // namespace nbh
