#include "smvscan/region.hpp"

#include <algorithm>
#include <cstdio>

namespace smvscan {

std::string_view to_string(RegionKind k) noexcept {
    switch (k) {
        case RegionKind::Public: return "public";
        case RegionKind::Internal: return "internal";
        case RegionKind::InheritedRecovered: return "inherited-recovered";
    }
    return "?";
}

std::string_view to_string(LabelSource s) noexcept {
    return s == LabelSource::Heuristic ? "heuristic" : "model";
}

const MethodRegion* innermost_region(const std::vector<MethodRegion>& regions, std::size_t offset) {
    const MethodRegion* best = nullptr;
    for (const auto& r : regions) {
        if (!r.contains(offset)) continue;
        if (best == nullptr || (r.end - r.start) < (best->end - best->start) ||
            ((r.end - r.start) == (best->end - best->start) && r.start > best->start))
            best = &r;
    }
    return best;
}

const MethodRegion* region_starting_at(const std::vector<MethodRegion>& regions, std::size_t offset) {
    const MethodRegion* best = nullptr;
    for (const auto& r : regions)
        if (r.start == offset && (best == nullptr || r.end > best->end)) best = &r;
    return best;
}

void normalize_regions(std::vector<MethodRegion>& regions) {
    std::stable_sort(regions.begin(), regions.end(), [](const MethodRegion& a, const MethodRegion& b) {
        if (a.start != b.start) return a.start < b.start;
        return a.end > b.end;
    });
    for (std::uint32_t i = 0; i < regions.size(); ++i) regions[i].id = i;
}

std::string format_selector(std::uint32_t selector) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "0x%08x", selector);
    return buf;
}

}  // namespace smvscan
