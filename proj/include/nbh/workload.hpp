#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nbh/common.hpp"

namespace nbh {

enum class KeyDist { kUniform, kZipfian };

struct WorkloadSpec {
  std::uint64_t key_count = 1u << 20;
  KeyDist distribution = KeyDist::kUniform;
  double zipf_s = 0.99;
  double load_factor = 0.8;
  double success_query_ratio = 0.9;
  std::uint64_t seed = 1;
};

// Deterministic workload with implicit key material: present keys are a
// bijective scramble of [0, key_count), absent keys of [key_count, ...), so
// arbitrarily large key sets need no storage and the present/absent split
// is exact by construction.
class Workload {
 public:
  explicit Workload(WorkloadSpec spec);

  const WorkloadSpec& spec() const { return spec_; }

  std::uint64_t key_at(std::uint64_t i) const;     // i in [0, key_count)
  std::uint64_t absent_at(std::uint64_t i) const;  // disjoint from every key_at
  std::uint64_t payload_of(std::uint64_t key) const;

  // Probe sequence with exactly round(count * sqr) present keys, present
  // picks drawn per the spec distribution, order shuffled deterministically.
  std::vector<std::uint64_t> build_probes(std::size_t count) const;

  // Rank sampled from the configured distribution (uniform or zipfian).
  std::uint64_t sample_rank(std::mt19937_64& rng) const;

 private:
  WorkloadSpec spec_;
  std::uint64_t key_base_;
  std::uint64_t payload_salt_;
  double zeta_n_ = 0.0;  // zipf normalization, precomputed
  double zeta2_ = 0.0;
  double alpha_ = 0.0, eta_ = 0.0;  // Gray's sampler constants
};

// Uniform integer in [0, n) from a raw 64-bit draw (Lemire reduction);
// keeps shuffles deterministic across standard library implementations.
inline std::uint64_t bounded(std::uint64_t draw, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(draw) * static_cast<unsigned __int128>(n)) >> 64);
}

}  // namespace nbh
