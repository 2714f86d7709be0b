#include "doctest.h"

#include "fixture_util.hpp"
#include "smvscan/assembler.hpp"
#include "smvscan/detector.hpp"

#include <set>

using namespace smvscan;

namespace {

// A contract analysed with heuristic regions and no database.
struct Harness {
    Assembly asm_;
    ControlFlowGraph cfg;
    std::vector<MethodRegion> regions;
    std::vector<std::vector<Chain>> chains;
    std::vector<MethodSignature> sigs;
    std::vector<ReuseMatch> matches;
    Database db;
    KnowledgeBase kb;

    explicit Harness(std::string_view src, std::vector<MethodRegion> forced = {})
        : asm_(assemble(src)), cfg(build_cfg(decode(asm_.code))) {
        regions = forced.empty() ? recover_heuristic(cfg) : std::move(forced);
        chains = all_call_chains(cfg, regions);
        sigs = extract_signatures(cfg, regions, chains);
    }
    DetectorContext ctx() const { return {cfg, regions, sigs, chains, matches, db, kb, {}}; }
};

Indicator lack_of_check(std::uint32_t site, std::uint32_t via) {
    Indicator ind;
    ind.rule = SmvType::LackOfSecurityCheck;
    ind.site = site;
    ind.via = via;
    return ind;
}

constexpr std::string_view kPrologue = R"(
    PUSH1 0x00 CALLDATALOAD PUSH1 0xe0 SHR
    DUP1 PUSH4 @sel(f()) EQ PUSH @f JUMPI
    PUSH1 0x00 DUP1 REVERT
)";

std::string with_prologue(std::string_view body) { return std::string(kPrologue) + std::string(body); }

std::set<SlotDescriptor> taint_of(const Harness& h) {
    REQUIRE(!h.regions.empty());
    return taint_state_variables(h.ctx(), lack_of_check(0, 0));
}

}  // namespace

TEST_CASE("taint sources are message-call reads") {
    const auto s = decode(assemble("CALLER CALLVALUE CALLDATALOAD ORIGIN ADDRESS SLOAD").code);
    CHECK(is_taint_source(s, 0));
    CHECK(is_taint_source(s, 1));
    CHECK(is_taint_source(s, 2));
    CHECK_FALSE(is_taint_source(s, 4));
    CHECK_FALSE(is_taint_source(s, 5));
}

TEST_CASE("calldata stored directly taints the slot") {
    const Harness h(with_prologue("f: JUMPDEST PUSH1 0x04 CALLDATALOAD PUSH1 0x03 SSTORE STOP"));
    CHECK(taint_of(h) == std::set<SlotDescriptor>{SlotDescriptor::constant(3)});
}

TEST_CASE("constant stores are not tainted") {
    const Harness h(with_prologue("f: JUMPDEST PUSH1 0x2a PUSH1 0x03 SSTORE STOP"));
    CHECK(taint_of(h).empty());
}

TEST_CASE("taint passes through arithmetic and memory") {
    const Harness h(with_prologue(R"(
        f: JUMPDEST
          PUSH1 0x04 CALLDATALOAD PUSH1 0x01 ADD PUSH1 0x40 MSTORE
          PUSH1 0x40 MLOAD PUSH1 0x03 SSTORE
          PUSH1 0x60 MLOAD PUSH1 0x05 SSTORE
          STOP
    )"));
    // 0x60 was never written with tainted data
    CHECK(taint_of(h) == std::set<SlotDescriptor>{SlotDescriptor::constant(3)});
}

TEST_CASE("a tainted slot key taints the mapping entry") {
    const Harness h(with_prologue(R"(
        f: JUMPDEST
          PUSH1 0x2a CALLER PUSH1 0x00 MSTORE PUSH1 0x02 PUSH1 0x20 MSTORE
          PUSH1 0x40 PUSH1 0x00 SHA3 SSTORE STOP
    )"));
    CHECK(taint_of(h) == std::set<SlotDescriptor>{SlotDescriptor::hashed(2)});
}

TEST_CASE("value transfers are ETH-balance sinks") {
    const Harness h(with_prologue(R"(
        f: JUMPDEST
          PUSH1 0x00 DUP1 DUP1 DUP1 PUSH1 0x24 CALLDATALOAD PUSH1 0x04 CALLDATALOAD GAS CALL STOP
    )"));
    CHECK(taint_of(h) == std::set<SlotDescriptor>{SlotDescriptor::eth_balance()});

    // a zero-value call only redirects control to a chosen address
    const Harness z(with_prologue(R"(
        f: JUMPDEST
          PUSH1 0x00 DUP1 DUP1 DUP1 DUP1 PUSH1 0x04 CALLDATALOAD GAS CALL STOP
    )"));
    CHECK(taint_of(z) == std::set<SlotDescriptor>{SlotDescriptor::call_target()});
}

TEST_CASE("entry reachability") {
    const auto src = with_prologue(R"(
        f: JUMPDEST PUSH @r PUSH @g JUMP
        r: JUMPDEST STOP
        g: JUMPDEST PUSH1 0x01 PUSH1 0x00 SSTORE JUMP
        dead: JUMPDEST PUSH1 0x02 PUSH1 0x00 SSTORE STOP
    )");
    const auto a = assemble(src);
    const auto len = a.code.size();
    auto region = [](std::uint32_t id, std::size_t s, std::size_t e, RegionKind k) {
        MethodRegion r;
        r.id = id;
        r.start = s;
        r.end = e;
        r.kind = k;
        return r;
    };
    const Harness h(src, {region(0, a.label("f"), a.label("g"), RegionKind::Public),
                          region(1, a.label("g"), a.label("dead"), RegionKind::Internal),
                          region(2, a.label("dead"), len, RegionKind::Internal)});
    const auto ctx = h.ctx();
    CHECK(entry_reachability(ctx, 0) == std::vector<std::uint32_t>{0});
    CHECK(entry_reachability(ctx, 1) == std::vector<std::uint32_t>{0, 1});
    CHECK_FALSE(entry_reachability(ctx, 2));
}

TEST_CASE("no indicators, no traces") {
    const Harness h(with_prologue("f: JUMPDEST PUSH1 0x04 CALLDATALOAD PUSH1 0x03 SSTORE STOP"));
    const auto d = detect(h.ctx());
    CHECK(d.indicators.empty());
    CHECK(d.traces.empty());
    CHECK(d.warnings.empty());
}

TEST_CASE("unguarded value call in swap_router") {
    const auto s = testing::scan("swap_router");
    const auto& d = s.analysis.detection;
    REQUIRE(d.indicators.size() == 1);
    CHECK(d.indicators[0].rule == SmvType::LackOfSecurityCheck);
    CHECK_FALSE(d.indicators[0].call_sites.empty());
    REQUIRE(d.traces.size() == 1);
    CHECK(std::count(d.traces[0].affected.begin(), d.traces[0].affected.end(), SlotDescriptor::eth_balance()) == 1);

    const auto p = testing::scan("swap_router_patched");
    CHECK(p.analysis.detection.indicators.empty());
    CHECK(p.analysis.detection.traces.empty());
}

TEST_CASE("constant-amount sendValue is reachable but untainted") {
    const auto s = testing::scan("sendvalue_const");
    CHECK(s.analysis.detection.traces.empty());
    CHECK(s.analysis.detection.warnings.size() == 1);
}

TEST_CASE("detector invariants over the fixture corpus") {
    for (const auto& name : testing::contract_names()) {
        CAPTURE(name);
        const auto s = testing::scan(name);
        const auto& a = s.analysis;
        const auto& d = a.detection;
        const auto edges = call_graph(a.cfg, a.regions);
        std::set<std::uint32_t> matched;
        for (const auto& m : a.matches) matched.insert(m.region);
        for (const auto& ind : d.indicators) CHECK(matched.count(ind.site) == 1);
        CHECK(d.traces.size() + d.warnings.size() + d.unreachable.size() == d.indicators.size());
        for (const auto& t : d.traces) {
            CHECK(t.indicator < d.indicators.size());
            CHECK(a.regions[t.entry].kind == RegionKind::Public);
            CHECK(t.chain.front() == t.entry);
            CHECK(!t.affected.empty());
            REQUIRE(t.entry_selector);
            CHECK(a.cfg.public_entries().count(*t.entry_selector) == 1);
            for (std::size_t i = 0; i + 1 < t.chain.size(); ++i) {
                const bool edge = std::any_of(edges.begin(), edges.end(), [&](const CallGraphEdge& e) {
                    return e.internal() && e.caller == t.chain[i] && e.callee_region() == t.chain[i + 1];
                });
                CHECK(edge);
            }
        }
    }
}

TEST_CASE("removing data-flow edges never adds tainted slots") {
    for (const auto& name : testing::contract_names()) {
        CAPTURE(name);
        const auto s = testing::scan(name);
        const auto& base = s.analysis;
        const auto ctx = detector_context(base, testing::fixture_db(), testing::fixture_kb(), {});
        const auto& code = base.cfg.stream().code();
        for (std::size_t k = 0; k < 6 && !code.empty(); ++k) {
            AnalysisOptions o;
            for (std::size_t i = k; i < code.size(); i += 6) o.flow.blocked_sites.insert(code[i].offset);
            const auto cut = reanalyze_flow(base, testing::fixture_db(), testing::fixture_kb(), o);
            const auto cut_ctx = detector_context(cut, testing::fixture_db(), testing::fixture_kb(), {});
            for (const auto& ind : base.detection.indicators) {
                const auto before = taint_state_variables(ctx, ind);
                const auto after = taint_state_variables(cut_ctx, ind);
                CHECK(std::includes(before.begin(), before.end(), after.begin(), after.end()));
            }
        }
    }
}
