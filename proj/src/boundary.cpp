#include "smvscan/boundary.hpp"

#include "smvscan/error.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

namespace smvscan {

std::string_view to_string(Label l) noexcept {
    switch (l) {
        case Label::S: return "S";
        case Label::E: return "E";
        case Label::N: return "N";
    }
    return "?";
}

std::string_view to_string(BoundaryMode m) noexcept {
    switch (m) {
        case BoundaryMode::Heuristic: return "heuristic";
        case BoundaryMode::Model: return "model";
        case BoundaryMode::Both: return "both";
    }
    return "?";
}

std::vector<std::uint16_t> tokenize(const InstructionStream& stream, std::size_t begin, std::size_t end,
                                    std::size_t max_seq_len) {
    if (begin > end || end > stream.code_len())
        throw WindowOutOfRange("window [" + std::to_string(begin) + ", " + std::to_string(end) +
                               ") outside code of " + std::to_string(stream.code_len()) + " bytes");
    if (end - begin > max_seq_len)
        throw WindowOutOfRange("window of " + std::to_string(end - begin) + " bytes exceeds max_seq_len " +
                               std::to_string(max_seq_len));
    std::vector<std::uint16_t> out(max_seq_len, kPad);
    const auto& bytes = stream.bytes();
    for (std::size_t i = begin; i < end; ++i) out[i - begin] = static_cast<std::uint16_t>(bytes[i] + kReservedTokens);
    return out;
}

bool laminar(const std::vector<MethodRegion>& regions) {
    for (std::size_t i = 0; i < regions.size(); ++i)
        for (std::size_t j = i + 1; j < regions.size(); ++j) {
            const auto& a = regions[i];
            const auto& b = regions[j];
            const bool disjoint = a.end <= b.start || b.end <= a.start;
            const bool nested = (a.start <= b.start && b.end <= a.end) || (b.start <= a.start && a.end <= b.end);
            if (!disjoint && !nested) return false;
        }
    return true;
}

namespace {

/// Ends regions that straddle a later region's start at that start.
void remove_partial_overlaps(std::vector<MethodRegion>& regions) {
    normalize_regions(regions);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < regions.size(); ++i)
            for (std::size_t j = i + 1; j < regions.size(); ++j) {
                auto& a = regions[i];
                const auto& b = regions[j];
                if (b.start > a.start && b.start < a.end && b.end > a.end) {
                    a.end = b.start;
                    changed = true;
                }
            }
    }
    normalize_regions(regions);
}

void classify_nesting(std::vector<MethodRegion>& regions) {
    for (auto& r : regions) {
        if (r.kind == RegionKind::Public) continue;
        const bool nested = std::any_of(regions.begin(), regions.end(), [&](const MethodRegion& p) {
            return &p != &r && p.contains(r);
        });
        r.kind = nested ? RegionKind::InheritedRecovered : RegionKind::Internal;
    }
}

}  // namespace

std::vector<MethodRegion> recover_heuristic(const ControlFlowGraph& cfg) {
    const auto& blocks = cfg.blocks();
    struct Entry {
        std::uint32_t block;
        RegionKind kind;
        std::optional<std::uint32_t> selector;
    };
    std::map<std::uint32_t, Entry> entries;  // by entry block
    for (const auto& [sel, b] : cfg.public_entries())
        if (!entries.count(b)) entries.emplace(b, Entry{b, RegionKind::Public, sel});
    for (const auto& cs : cfg.call_sites())
        if (!entries.count(cs.callee_block)) entries.emplace(cs.callee_block, Entry{cs.callee_block, RegionKind::Internal, {}});

    // Intraprocedural block sets: follow local edges, stop at calls, returns
    // and the entries of other regions.
    std::map<std::uint32_t, std::set<std::uint32_t>> body;
    std::map<std::uint32_t, std::set<std::uint32_t>> callees;
    for (const auto& [eb, e] : entries) {
        auto& own = body[eb];
        std::deque<std::uint32_t> work{eb};
        own.insert(eb);
        while (!work.empty()) {
            const auto b = work.front();
            work.pop_front();
            for (const auto& edge : blocks[b].successors) {
                if (edge.target == kUnknownBlock) continue;
                if (edge.kind == EdgeKind::Call) {
                    callees[eb].insert(edge.target);
                    continue;
                }
                if (edge.kind == EdgeKind::Return || edge.kind == EdgeKind::Unknown) continue;
                if (entries.count(edge.target) && edge.target != eb) continue;
                if (own.insert(edge.target).second) work.push_back(edge.target);
            }
        }
    }

    std::vector<MethodRegion> regions;
    for (const auto& [eb, e] : entries) {
        // Blocks of everything this region calls, transitively.
        std::set<std::uint32_t> closure;
        std::set<std::uint32_t> seen{eb};
        std::deque<std::uint32_t> work(callees[eb].begin(), callees[eb].end());
        while (!work.empty()) {
            const auto c = work.front();
            work.pop_front();
            if (!seen.insert(c).second || !entries.count(c)) continue;
            closure.insert(body[c].begin(), body[c].end());
            for (auto cc : callees[c]) work.push_back(cc);
        }
        // Extend the span over physically following own blocks, stepping over
        // callee code that is sandwiched between them.
        const auto& own = body[eb];
        std::size_t end = blocks[eb].end;
        for (std::uint32_t b = eb + 1; b < blocks.size(); ++b) {
            if (own.count(b)) end = blocks[b].end;
            else if (!closure.count(b)) break;
        }
        MethodRegion r;
        r.start = blocks[eb].start;
        r.end = end;
        r.kind = e.kind;
        r.source = LabelSource::Heuristic;
        r.selector = e.selector;
        regions.push_back(r);
    }
    remove_partial_overlaps(regions);
    classify_nesting(regions);
    return regions;
}

std::vector<BoundaryLabel> regions_to_labels(const std::vector<MethodRegion>& regions) {
    std::vector<BoundaryLabel> out;
    for (const auto& r : regions) {
        out.push_back({r.start, Label::S, 1.0f, r.source});
        out.push_back({r.end, Label::E, 1.0f, r.source});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const BoundaryLabel& a, const BoundaryLabel& b) { return a.offset < b.offset; });
    return out;
}

std::vector<MethodRegion> pair_labels(const std::vector<BoundaryLabel>& labels, std::size_t code_len) {
    std::vector<BoundaryLabel> marks;
    for (const auto& l : labels)
        if (l.label != Label::N) marks.push_back(l);
    std::stable_sort(marks.begin(), marks.end(),
                     [](const BoundaryLabel& a, const BoundaryLabel& b) { return a.offset < b.offset; });
    std::vector<MethodRegion> out;
    bool is_open = false;
    std::size_t open = 0;
    auto close = [&](std::size_t end) {
        if (is_open && end > open) {
            MethodRegion r;
            r.start = open;
            r.end = end;
            r.source = LabelSource::Model;
            out.push_back(r);
        }
        is_open = false;
    };
    for (const auto& m : marks) {
        if (m.label == Label::S) {
            close(m.offset);
            is_open = true;
            open = m.offset;
        } else {
            close(m.offset);
        }
    }
    close(std::max(code_len, open));
    return out;
}

std::vector<MethodRegion> merge_regions(const std::vector<MethodRegion>& heuristic,
                                        const std::vector<MethodRegion>& model, BoundaryMode mode) {
    if (mode == BoundaryMode::Heuristic) return heuristic;
    std::vector<MethodRegion> out;
    for (const auto& r : heuristic)
        if (mode == BoundaryMode::Both || r.kind == RegionKind::Public) out.push_back(r);
    const auto kept = out;
    auto overlaps = [](const MethodRegion& a, const MethodRegion& b) { return a.start < b.end && b.start < a.end; };
    auto partial = [&](const MethodRegion& a, const MethodRegion& b) {
        return overlaps(a, b) && !(a.start <= b.start && b.end <= a.end) && !(b.start <= a.start && a.end <= b.end);
    };
    for (auto r : model) {
        if (r.end <= r.start) continue;
        bool ok = true;
        for (const auto& k : kept) {
            if (k.start == r.start || partial(k, r)) ok = false;
            if (mode == BoundaryMode::Both && k.kind != RegionKind::Public && overlaps(k, r)) ok = false;
            if (!ok) break;
        }
        for (const auto& o : out)
            if (o.source == LabelSource::Model && (partial(o, r) || (o.start == r.start && o.end == r.end))) ok = false;
        if (!ok) continue;
        r.source = LabelSource::Model;
        r.kind = RegionKind::Internal;
        r.selector.reset();
        out.push_back(r);
    }
    normalize_regions(out);
    classify_nesting(out);
    return out;
}

std::vector<MethodRegion> labels_to_regions(const std::vector<BoundaryLabel>& labels, const ControlFlowGraph& cfg) {
    return merge_regions(recover_heuristic(cfg), pair_labels(labels, cfg.stream().code_len()), BoundaryMode::Model);
}

}  // namespace smvscan
