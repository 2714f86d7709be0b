#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace smvscan {

/// 256-bit machine word with wrap-around arithmetic.
using Word = boost::multiprecision::uint256_t;

/// Lower-case hex without leading zeros ("0x0" for zero).
std::string to_hex(const Word& w);

/// The word as a byte offset when it fits comfortably in memory-sized ranges.
std::optional<std::uint64_t> as_offset(const Word& w, std::uint64_t limit = (1ull << 32));

}  // namespace smvscan
