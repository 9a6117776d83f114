#pragma once

#include <cstdint>

namespace nbh {

// One 64-bit value word per bucket: the high 12 bits hold the relative
// offset to the next bucket in the collision chain, the low 52 bits hold
// the stored payload.
//
// Offset code 0 terminates a chain. Codes [1, 2048] map to forward
// offsets +1..+2048; codes [2049, 4095] map to backward offsets
// -2047..-1 (code - 4096).
struct PackedSlot {
  std::uint64_t raw = 0;

  static constexpr int kOffsetBits = 12;
  static constexpr int kPayloadBits = 52;
  static constexpr std::uint64_t kPayloadMask = (1ull << kPayloadBits) - 1;
  static constexpr std::int64_t kMaxForward = 2048;
  static constexpr std::int64_t kMaxBackward = 2047;  // i.e. offsets down to -2047

  constexpr std::uint32_t offset_code() const noexcept {
    return static_cast<std::uint32_t>(raw >> kPayloadBits);
  }
  constexpr std::uint64_t payload() const noexcept { return raw & kPayloadMask; }
  constexpr bool has_next() const noexcept { return offset_code() != 0; }

  static constexpr bool offset_encodable(std::int64_t d) noexcept {
    return d != 0 && d >= -kMaxBackward && d <= kMaxForward;
  }

  static constexpr std::uint32_t encode_offset(std::int64_t d) noexcept {
    return static_cast<std::uint32_t>(d > 0 ? d : d + 4096);
  }

  static constexpr std::int64_t decode_offset(std::uint32_t code) noexcept {
    return code <= kMaxForward ? static_cast<std::int64_t>(code)
                               : static_cast<std::int64_t>(code) - 4096;
  }

  static constexpr PackedSlot make(std::uint32_t code, std::uint64_t payload) noexcept {
    return PackedSlot{(static_cast<std::uint64_t>(code) << kPayloadBits) |
                      (payload & kPayloadMask)};
  }

  constexpr PackedSlot with_payload(std::uint64_t payload) const noexcept {
    return PackedSlot{(raw & ~kPayloadMask) | (payload & kPayloadMask)};
  }
  constexpr PackedSlot with_offset(std::uint32_t code) const noexcept {
    return PackedSlot{(static_cast<std::uint64_t>(code) << kPayloadBits) |
                      (raw & kPayloadMask)};
  }
};

}  // namespace nbh
