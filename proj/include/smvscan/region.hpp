#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smvscan {

enum class RegionKind { Public, Internal, InheritedRecovered };
enum class LabelSource { Heuristic, Model };

std::string_view to_string(RegionKind k) noexcept;
std::string_view to_string(LabelSource s) noexcept;

/// A recovered method: [start, end) in bytes of the executable region.
struct MethodRegion {
    std::uint32_t id = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    RegionKind kind = RegionKind::Internal;
    LabelSource source = LabelSource::Heuristic;
    std::optional<std::uint32_t> selector;

    bool contains(std::size_t offset) const noexcept { return offset >= start && offset < end; }
    bool contains(const MethodRegion& o) const noexcept {
        return o.start >= start && o.end <= end && !(o.start == start && o.end == end);
    }
};

/// Innermost region covering `offset`, if any.
const MethodRegion* innermost_region(const std::vector<MethodRegion>& regions, std::size_t offset);

/// Region starting exactly at `offset`, preferring the outermost one.
const MethodRegion* region_starting_at(const std::vector<MethodRegion>& regions, std::size_t offset);

/// Sorts by (start asc, end desc) and reassigns dense ids in that order.
void normalize_regions(std::vector<MethodRegion>& regions);

std::string format_selector(std::uint32_t selector);

}  // namespace smvscan
