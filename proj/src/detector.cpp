#include "smvscan/detector.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>

namespace smvscan {

std::string_view to_string(SmvType t) noexcept {
    return t == SmvType::VariableConflict ? "variable-conflict" : "lack-of-security-check";
}

bool is_taint_source(const InstructionStream& stream, std::size_t offset) noexcept {
    const auto* ins = stream.at(offset);
    if (ins == nullptr) return false;
    switch (ins->op()) {
        case Op::CALLER: case Op::CALLDATASIZE: case Op::CALLDATALOAD: case Op::CALLVALUE:
        case Op::CALLDATACOPY: case Op::CALLCODE:
            return true;
        default:
            return false;
    }
}

namespace {

std::set<std::uint32_t> chain_regions(const DetectorContext& ctx, std::uint32_t root) {
    std::set<std::uint32_t> out{root};
    for (const auto& c : ctx.chains.at(root)) out.insert(c.begin(), c.end());
    return out;
}

bool in_regions(const DetectorContext& ctx, const std::set<std::uint32_t>& set, std::size_t offset) {
    const auto* r = innermost_region(ctx.regions, offset);
    return r != nullptr && set.count(r->id) > 0;
}

std::vector<SlotDescriptor> written_slots(const DetectorContext& ctx, const std::set<std::uint32_t>& set) {
    std::vector<SlotDescriptor> out;
    for (const auto& a : storage_accesses(ctx.cfg))
        if (a.kind == StorageAccess::Kind::Write && in_regions(ctx, set, a.site)) out.push_back(a.slot);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool const_zero(const AbstractValue& v) { return v.is_const() && v.konst == 0; }

bool writes_or_sends(const DetectorContext& ctx, const std::set<std::uint32_t>& set) {
    for (const auto& ins : ctx.cfg.stream().code()) {
        if (!in_regions(ctx, set, ins.offset)) continue;
        const auto& f = ctx.cfg.fact_at(ins.offset);
        if (!f.reached) continue;
        if (ins.op() == Op::SSTORE || ins.op() == Op::SELFDESTRUCT) return true;
        if ((ins.op() == Op::CALL || ins.op() == Op::CALLCODE) && f.operands.size() > 2 && !const_zero(f.operands[2]))
            return true;
    }
    return false;
}

bool any_source(const DetectorContext& ctx, const Origins& o) {
    return std::any_of(o.begin(), o.end(), [&](std::uint32_t off) { return is_taint_source(ctx.cfg.stream(), off); });
}

MethodRef ref_of(const SubcontractRecord& r) { return {r.key.subcontract, r.key.method}; }

// --- guards ---------------------------------------------------------------

bool reverts_soon(const ControlFlowGraph& cfg, std::uint32_t b, int budget) {
    const auto& blk = cfg.blocks()[b];
    if (cfg.stream().code()[blk.last - 1].op() == Op::REVERT) return true;
    if (budget == 0) return false;
    for (const auto& e : blk.successors)
        if ((e.kind == EdgeKind::Fallthrough || e.kind == EdgeKind::Jump) && e.target != kUnknownBlock &&
            reverts_soon(cfg, e.target, budget - 1))
            return true;
    return false;
}

bool satisfies(const DetectorContext& ctx, const AbstractValue& cond, GuardKind kind, const Origins& params) {
    const auto& s = ctx.cfg.stream();
    switch (kind) {
        case GuardKind::ValueBound: {
            Origins common;
            std::set_intersection(cond.origins.begin(), cond.origins.end(), params.begin(), params.end(),
                                  std::back_inserter(common));
            return !common.empty();
        }
        case GuardKind::CallerCheck:
            return std::any_of(cond.origins.begin(), cond.origins.end(),
                               [&](std::uint32_t o) { return s.at(o) != nullptr && s.at(o)->op() == Op::CALLER; });
        case GuardKind::ReentrancyGuard:
            return std::any_of(cond.origins.begin(), cond.origins.end(), [&](std::uint32_t o) {
                if (s.at(o) == nullptr || s.at(o)->op() != Op::SLOAD) return false;
                const auto& f = ctx.cfg.fact_at(o);
                return !f.operands.empty() && f.operands[0].is_const();
            });
    }
    return false;
}

std::set<std::uint32_t> guard_blocks(const DetectorContext& ctx, GuardKind kind, const Origins& params) {
    std::set<std::uint32_t> out;
    const auto& cfg = ctx.cfg;
    for (const auto& b : cfg.blocks()) {
        if (!b.reachable) continue;
        const auto& tail = cfg.stream().code()[b.last - 1];
        if (tail.op() != Op::JUMPI) continue;
        const auto& f = cfg.fact_at(tail.offset);
        if (!f.reached || f.operands.size() < 2) continue;
        bool revert_branch = false;
        for (const auto& e : b.successors)
            if (e.target != kUnknownBlock && reverts_soon(cfg, e.target, 3)) revert_branch = true;
        if (revert_branch && satisfies(ctx, f.operands[1], kind, params)) out.insert(b.id);
    }
    return out;
}

/// Whether some path from the contract entry reaches `target` without passing
/// a guard block. Internal calls are crossed through their summary edge only
/// when the callee can return without passing a guard.
class GuardFreeSearch {
public:
    GuardFreeSearch(const ControlFlowGraph& cfg, const std::set<std::uint32_t>& guards) : cfg_(cfg), guards_(guards) {}

    bool reaches(std::uint32_t target) {
        return search(cfg_.entry(), [&](std::uint32_t b) { return b == target; }, true);
    }

private:
    const ControlFlowGraph& cfg_;
    const std::set<std::uint32_t>& guards_;
    std::map<std::uint32_t, bool> exits_;

    bool exits_clean(std::uint32_t callee) {
        if (auto it = exits_.find(callee); it != exits_.end()) return it->second;
        exits_[callee] = false;  // recursion counts as not returning
        const bool ok = search(callee, [&](std::uint32_t b) {
            for (const auto& e : cfg_.blocks()[b].successors)
                if (e.kind == EdgeKind::Return) return true;
            return false;
        }, false);
        exits_[callee] = ok;
        return ok;
    }

    bool search(std::uint32_t from, const std::function<bool(std::uint32_t)>& goal, bool enter_calls) {
        if (guards_.count(from)) return false;
        std::set<std::uint32_t> seen{from};
        std::deque<std::uint32_t> work{from};
        while (!work.empty()) {
            const auto b = work.front();
            work.pop_front();
            if (goal(b)) return true;
            const auto& succ = cfg_.blocks()[b].successors;
            std::uint32_t callee = kUnknownBlock;
            for (const auto& e : succ)
                if (e.kind == EdgeKind::Call) callee = e.target;
            for (const auto& e : succ) {
                if (e.target == kUnknownBlock || guards_.count(e.target)) continue;
                bool follow = false;
                switch (e.kind) {
                    case EdgeKind::Fallthrough: case EdgeKind::Jump: case EdgeKind::BranchTaken:
                        follow = true;
                        break;
                    case EdgeKind::Call:
                        follow = enter_calls;
                        break;
                    case EdgeKind::CallReturn:
                        follow = callee != kUnknownBlock && exits_clean(callee);
                        break;
                    default:
                        break;
                }
                if (follow && seen.insert(e.target).second) work.push_back(e.target);
            }
        }
        return false;
    }
};

}  // namespace

std::vector<Indicator> find_indicators(const DetectorContext& ctx) {
    std::vector<Indicator> out;
    // Best matches whose DB visibility agrees with the region kind: a public
    // region stands for a reused public method, anything else for an internal one.
    std::vector<std::pair<std::uint32_t, std::size_t>> best;  // region -> match index
    for (std::size_t i = 0; i < ctx.matches.size(); ++i) {
        const auto& m = ctx.matches[i];
        const bool public_region = ctx.regions[m.region].kind == RegionKind::Public;
        const bool public_record = ctx.db.records[m.record].visibility == Visibility::Public;
        if (m.best && public_region == public_record) best.emplace_back(m.region, i);
    }

    // Variable conflicts between functionally similar reused methods.
    for (std::size_t x = 0; x < best.size(); ++x)
        for (std::size_t y = x + 1; y < best.size(); ++y) {
            const auto& ma = ctx.matches[best[x].second];
            const auto& mb = ctx.matches[best[y].second];
            const auto& ra = ctx.db.records[ma.record];
            const auto& rb = ctx.db.records[mb.record];
            if (ra.key.subcontract == rb.key.subcontract) continue;
            std::optional<std::size_t> kb_index;
            for (std::size_t k = 0; k < ctx.kb.entries.size(); ++k) {
                const auto& e = ctx.kb.entries[k];
                if (e.kind == KnowledgeEntry::Kind::Conflict &&
                    ((e.members[0] == ref_of(ra) && e.members[1] == ref_of(rb)) ||
                     (e.members[0] == ref_of(rb) && e.members[1] == ref_of(ra))))
                    kb_index = k;
            }
            bool similar = kb_index.has_value();
            if (!similar) {
                const auto [fa, fb] = comparable(ctx.signatures.at(ma.region), ctx.signatures.at(mb.region));
                similar = !fa->empty() && !fb->empty() &&
                          opcode_type_similarity(*fa, *fb) >= ctx.thresholds.theta1 &&
                          opcode_length_similarity(*fa, *fb, false) >= ctx.thresholds.theta2;
            }
            if (!similar) continue;
            const auto wa = written_slots(ctx, chain_regions(ctx, ma.region));
            const auto wb = written_slots(ctx, chain_regions(ctx, mb.region));
            std::vector<SlotDescriptor> common;
            for (const auto& a : wa)
                for (const auto& b : wb)
                    if (a.same_slot(b)) common.push_back(a);
            if (common.empty()) continue;
            Indicator ind;
            ind.rule = SmvType::VariableConflict;
            const bool a_first = ctx.regions[ma.region].start <= ctx.regions[mb.region].start;
            ind.site = a_first ? ma.region : mb.region;
            ind.via = a_first ? mb.region : ma.region;
            ind.matches = a_first ? std::vector<std::size_t>{best[x].second, best[y].second}
                                  : std::vector<std::size_t>{best[y].second, best[x].second};
            ind.knowledge = kb_index;
            ind.common_slots = std::move(common);
            out.push_back(std::move(ind));
        }

    // Reused internal methods that need a check their callers omit.
    for (const auto& [region, mi] : best) {
        const auto& rec = ctx.db.records[ctx.matches[mi].record];
        if (rec.visibility != Visibility::Internal) continue;
        const KnowledgeEntry* required = nullptr;
        std::size_t kb_index = 0;
        for (std::size_t k = 0; k < ctx.kb.entries.size(); ++k)
            if (ctx.kb.entries[k].kind == KnowledgeEntry::Kind::AccessControl &&
                ctx.kb.entries[k].members[0] == ref_of(rec)) {
                required = &ctx.kb.entries[k];
                kb_index = k;
                break;
            }
        if (required == nullptr || !writes_or_sends(ctx, chain_regions(ctx, region))) continue;

        std::map<std::uint32_t, Indicator> by_caller;
        for (const auto& cs : ctx.cfg.call_sites()) {
            const auto* callee = region_starting_at(ctx.regions, ctx.cfg.blocks()[cs.callee_block].start);
            const auto* caller = innermost_region(ctx.regions, cs.site);
            if (callee == nullptr || callee->id != region || caller == nullptr) continue;
            const auto& snap = ctx.cfg.fact_at(cs.site).operands;
            Origins params;
            for (unsigned p : required->guarded_params) {
                if (p > cs.return_depth) continue;
                const std::size_t idx = cs.return_depth + 1 - p;
                if (idx < snap.size()) params.insert(params.end(), snap[idx].origins.begin(), snap[idx].origins.end());
            }
            std::sort(params.begin(), params.end());
            params.erase(std::unique(params.begin(), params.end()), params.end());
            const auto guards = guard_blocks(ctx, required->guard, params);
            if (!GuardFreeSearch(ctx.cfg, guards).reaches(cs.block)) continue;
            auto& ind = by_caller[caller->id];
            ind.rule = SmvType::LackOfSecurityCheck;
            ind.site = region;
            ind.via = caller->id;
            ind.matches = {mi};
            ind.knowledge = kb_index;
            ind.call_sites.push_back(cs.site);
        }
        for (auto& [_, ind] : by_caller) out.push_back(std::move(ind));
    }
    return out;
}

std::optional<std::vector<std::uint32_t>> entry_reachability(const DetectorContext& ctx, std::uint32_t target) {
    const auto adj = internal_callees(ctx.cfg, ctx.regions);
    std::vector<std::optional<std::uint32_t>> parent(ctx.regions.size());
    std::vector<bool> seen(ctx.regions.size(), false);
    std::deque<std::uint32_t> work;
    for (const auto& r : ctx.regions)
        if (r.kind == RegionKind::Public && !seen[r.id]) {
            seen[r.id] = true;
            work.push_back(r.id);
        }
    while (!work.empty()) {
        const auto r = work.front();
        work.pop_front();
        if (r == target) {
            std::vector<std::uint32_t> path{r};
            for (auto p = parent[r]; p; p = parent[*p]) path.push_back(*p);
            std::reverse(path.begin(), path.end());
            return path;
        }
        for (auto c : adj[r])
            if (!seen[c]) {
                seen[c] = true;
                parent[c] = r;
                work.push_back(c);
            }
    }
    return std::nullopt;
}

namespace {

std::set<SlotDescriptor> tainted_sinks(const DetectorContext& ctx, const std::set<std::uint32_t>& set) {
    std::set<SlotDescriptor> out;
    auto tainted = [&](const AbstractValue& v) { return any_source(ctx, v.origins); };
    for (const auto& ins : ctx.cfg.stream().code()) {
        if (!in_regions(ctx, set, ins.offset)) continue;
        const auto& f = ctx.cfg.fact_at(ins.offset);
        if (!f.reached) continue;
        const auto& ops = f.operands;
        switch (ins.op()) {
            case Op::SSTORE:
                if (tainted(ops[0]) || tainted(ops[1])) out.insert(slot_of(ops[0]));
                break;
            case Op::CALL: case Op::CALLCODE:
                if (tainted(ops[2])) out.insert(SlotDescriptor::eth_balance());
                else if (tainted(ops[1]))
                    out.insert(const_zero(ops[2]) ? SlotDescriptor::call_target() : SlotDescriptor::eth_balance());
                break;
            case Op::DELEGATECALL: case Op::STATICCALL:
                if (tainted(ops[1])) out.insert(SlotDescriptor::call_target());
                break;
            case Op::SELFDESTRUCT:
                if (tainted(ops[0])) out.insert(SlotDescriptor::eth_balance());
                break;
            default:
                break;
        }
    }
    return out;
}

}  // namespace

std::set<SlotDescriptor> taint_state_variables(const DetectorContext& ctx, const Indicator& ind) {
    if (ind.rule == SmvType::LackOfSecurityCheck) return tainted_sinks(ctx, chain_regions(ctx, ind.site));
    auto set = chain_regions(ctx, ind.site);
    const auto other = chain_regions(ctx, ind.via);
    set.insert(other.begin(), other.end());
    std::set<SlotDescriptor> out;
    for (const auto& s : tainted_sinks(ctx, set))
        for (const auto& c : ind.common_slots)
            if (s.same_slot(c)) out.insert(s);
    return out;
}

Detection detect(const DetectorContext& ctx) {
    Detection d;
    d.indicators = find_indicators(ctx);
    std::vector<std::pair<std::size_t, VulnerabilityTrace>> keyed;  // site offset, trace
    for (std::size_t i = 0; i < d.indicators.size(); ++i) {
        const auto& ind = d.indicators[i];
        const std::uint32_t anchor = ind.rule == SmvType::LackOfSecurityCheck ? ind.via : ind.site;
        auto path = entry_reachability(ctx, anchor);
        if (!path) {
            d.unreachable.push_back(i);
            continue;
        }
        if (ind.rule == SmvType::LackOfSecurityCheck && path->back() != ind.site) path->push_back(ind.site);
        VulnerabilityTrace t;
        t.type = ind.rule;
        t.entry = path->front();
        t.entry_selector = ctx.regions[t.entry].selector;
        t.chain = *path;
        t.indicator = i;
        if (ind.rule == SmvType::VariableConflict) {
            auto other = entry_reachability(ctx, ind.via);
            if (!other) {
                d.unreachable.push_back(i);
                continue;
            }
            t.counterpart = VulnerabilityTrace::Counterpart{other->front(), ctx.regions[other->front()].selector, *other};
        }
        const auto affected = taint_state_variables(ctx, ind);
        if (affected.empty()) {
            d.warnings.push_back(i);
            continue;
        }
        t.affected.assign(affected.begin(), affected.end());
        keyed.emplace_back(ctx.regions[ind.site].start, std::move(t));
    }
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
        const auto sa = a.second.entry_selector.value_or(0xffffffffu);
        const auto sb = b.second.entry_selector.value_or(0xffffffffu);
        if (a.second.entry_selector.has_value() != b.second.entry_selector.has_value())
            return a.second.entry_selector.has_value();
        if (sa != sb) return sa < sb;
        return a.first < b.first;
    });
    for (auto& [_, t] : keyed) d.traces.push_back(std::move(t));
    return d;
}

}  // namespace smvscan
