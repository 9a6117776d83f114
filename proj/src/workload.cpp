#include "nbh/workload.hpp"

#include <cmath>
#include <stdexcept>

namespace nbh {

Workload::Workload(WorkloadSpec spec) : spec_(spec) {
  if (spec_.key_count == 0) throw std::invalid_argument("key_count must be positive");
  if (spec_.success_query_ratio < 0.0 || spec_.success_query_ratio > 1.0)
    throw std::invalid_argument("success_query_ratio out of [0,1]");
  key_base_ = mix64(spec_.seed ^ 0x7f4a7c1592e6ull);
  payload_salt_ = mix64(spec_.seed ^ 0xd1b54a32d192ed03ull);
  if (spec_.distribution == KeyDist::kZipfian) {
    const double s = spec_.zipf_s;
    double zeta = 0.0;
    for (std::uint64_t i = 1; i <= spec_.key_count; ++i)
      zeta += 1.0 / std::pow(static_cast<double>(i), s);
    zeta_n_ = zeta;
    zeta2_ = 1.0 + 1.0 / std::pow(2.0, s);
    alpha_ = 1.0 / (1.0 - s);
    eta_ = (1.0 - std::pow(2.0 / static_cast<double>(spec_.key_count), 1.0 - s)) /
           (1.0 - zeta2_ / zeta_n_);
  }
}

std::uint64_t Workload::key_at(std::uint64_t i) const {
  std::uint64_t k = mix64((i + 1) ^ key_base_);
  // The sentinel cannot be handed out; remap the astronomically rare hit.
  return k == kEmptyKey ? key_base_ | 1 : k;
}

std::uint64_t Workload::absent_at(std::uint64_t i) const {
  return key_at(spec_.key_count + 1 + i);
}

std::uint64_t Workload::payload_of(std::uint64_t key) const {
  return mix64(key + payload_salt_) & ((1ull << 52) - 1);
}

std::uint64_t Workload::sample_rank(std::mt19937_64& rng) const {
  const std::uint64_t n = spec_.key_count;
  if (spec_.distribution == KeyDist::kUniform) return bounded(rng(), n);
  // Gray et al. rejection-free zipf approximation.
  double u = static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
  double uz = u * zeta_n_;
  if (uz < 1.0) return 0;
  if (uz < zeta2_) return 1;
  auto r = static_cast<std::uint64_t>(
      static_cast<double>(n) * std::pow(eta_ * u - eta_ + 1.0, alpha_));
  return r >= n ? n - 1 : r;
}

std::vector<std::uint64_t> Workload::build_probes(std::size_t count) const {
  std::vector<std::uint64_t> probes(count);
  const auto hits = static_cast<std::size_t>(
      std::llround(spec_.success_query_ratio * static_cast<double>(count)));
  std::mt19937_64 rng(mix64(spec_.seed ^ 0xa0761d6478bd642full));
  for (std::size_t i = 0; i < hits; ++i) probes[i] = key_at(sample_rank(rng));
  for (std::size_t i = hits; i < count; ++i)
    probes[i] = absent_at(bounded(rng(), spec_.key_count * 4 + 64));
  // Fisher-Yates with explicit draws: deterministic across platforms.
  for (std::size_t i = count; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(rng(), i));
    std::swap(probes[i - 1], probes[j]);
  }
  return probes;
}

}  // namespace nbh
