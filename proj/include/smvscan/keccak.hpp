#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace smvscan {

/// Original Keccak-256 (0x01 padding), as used for selectors and storage slots.
std::array<std::uint8_t, 32> keccak256(std::span<const std::uint8_t> data);
std::array<std::uint8_t, 32> keccak256(std::string_view text);

/// First four bytes of keccak256 of a canonical method signature, big-endian.
std::uint32_t selector_of(std::string_view signature);

}  // namespace smvscan
