#include "doctest.h"

#include "smvscan/assembler.hpp"
#include "smvscan/flow.hpp"
#include "smvscan/keccak.hpp"

using namespace smvscan;

namespace {

ControlFlowGraph cfg_of(std::string_view src) { return build_cfg(decode(assemble(src).code)); }

bool has_edge(const ControlFlowGraph& g, std::uint32_t from, std::uint32_t to, EdgeKind k) {
    for (const auto& e : g.blocks()[from].successors)
        if (e.target == to && e.kind == k) return true;
    return false;
}

}  // namespace

TEST_CASE("constant jump") {
    const auto g = build_cfg(decode_hex("600456005b00"));
    REQUIRE(g.blocks().size() == 3);
    const auto target = g.block_at(4);
    REQUIRE(target != kUnknownBlock);
    CHECK(has_edge(g, 0, target, EdgeKind::Jump));
    std::size_t reachable = 0;
    for (const auto& b : g.blocks()) reachable += b.reachable;
    CHECK(reachable == 2);
    CHECK(g.dump() == "block0 -> block2 jump\n");
}

TEST_CASE("dynamic jump degrades to UNKNOWN") {
    const auto g = build_cfg(decode_hex("6000355600"));
    CHECK(g.dump() == "block0 -> UNKNOWN unknown\n");
}

TEST_CASE("single-selector dispatcher") {
    const auto a = assemble(R"(
        PUSH1 0x80 PUSH1 0x40 MSTORE
        PUSH1 0 CALLDATALOAD PUSH1 0xe0 SHR
        DUP1 PUSH4 0xa9059cbb EQ PUSH @transfer JUMPI
        PUSH1 0 DUP1 REVERT
        transfer: JUMPDEST STOP
    )");
    const auto g = build_cfg(decode(a.code));
    REQUIRE(g.public_entries().size() == 1);
    const auto it = g.public_entries().find(0xa9059cbb);
    REQUIRE(it != g.public_entries().end());
    CHECK(g.blocks()[it->second].start == a.label("transfer"));
}

TEST_CASE("legacy DIV dispatcher with masking") {
    const auto g = cfg_of(R"(
        PUSH1 0 CALLDATALOAD PUSH29 0x0100000000000000000000000000000000000000000000000000000000 SWAP1 DIV
        PUSH4 0xffffffff AND
        DUP1 PUSH @sel(a()) EQ PUSH @a JUMPI
        DUP1 PUSH @sel(b()) EQ PUSH @b JUMPI
        DUP1 PUSH @sel(c()) EQ PUSH @c JUMPI
        STOP
        a: JUMPDEST STOP
        b: JUMPDEST STOP
        c: JUMPDEST STOP
    )");
    CHECK(g.public_entries().size() == 3);
    CHECK(g.public_entries().count(selector_of("b()")) == 1);
}

TEST_CASE("storage slot classification") {
    SUBCASE("constant") {
        const auto acc = storage_accesses(build_cfg(decode_hex("60005400")));
        REQUIRE(acc.size() == 1);
        CHECK(acc[0].kind == StorageAccess::Kind::Read);
        CHECK(acc[0].slot == SlotDescriptor::constant(0));
        CHECK(acc[0].site == 2);
    }
    SUBCASE("mapping slot") {
        const auto acc = storage_accesses(cfg_of(R"(
            CALLER PUSH1 0 MSTORE PUSH1 2 PUSH1 0x20 MSTORE
            PUSH1 0x40 PUSH1 0 SHA3
            PUSH1 1 SWAP1 SSTORE STOP
        )"));
        REQUIRE(acc.size() == 1);
        CHECK(acc[0].kind == StorageAccess::Kind::Write);
        CHECK(acc[0].slot == SlotDescriptor::hashed(2));
        CHECK(acc[0].slot.to_string() == "hash(0x2)");
    }
    SUBCASE("calldata slot is opaque") {
        const auto acc = storage_accesses(build_cfg(decode_hex("6000355400")));
        REQUIRE(acc.size() == 1);
        CHECK(acc[0].slot == SlotDescriptor::opaque());
        CHECK_FALSE(acc[0].slot.same_slot(acc[0].slot));
    }
}

TEST_CASE("call idiom and return edges") {
    const auto a = assemble(R"(
        PUSH @back PUSH @f JUMP
        back: JUMPDEST STOP
        f: JUMPDEST PUSH1 1 POP JUMP
    )");
    const auto g = build_cfg(decode(a.code));
    REQUIRE(g.call_sites().size() == 1);
    const auto& cs = g.call_sites()[0];
    CHECK(g.blocks()[cs.callee_block].start == a.label("f"));
    CHECK(g.blocks()[cs.return_block].start == a.label("back"));
    CHECK(cs.return_depth == 0);
    CHECK(has_edge(g, 0, cs.callee_block, EdgeKind::Call));
    CHECK(has_edge(g, 0, cs.return_block, EdgeKind::CallReturn));
    CHECK(has_edge(g, cs.callee_block, cs.return_block, EdgeKind::Return));
}

TEST_CASE("two callers of one function return to their own sites") {
    const auto a = assemble(R"(
        PUSH @r1 PUSH @f JUMP
        r1: JUMPDEST PUSH @r2 PUSH @f JUMP
        r2: JUMPDEST STOP
        f: JUMPDEST JUMP
    )");
    const auto g = build_cfg(decode(a.code));
    const auto f = g.block_at(a.label("f"));
    std::vector<std::uint32_t> returns;
    for (const auto& e : g.blocks()[f].successors) {
        CHECK(e.kind == EdgeKind::Return);
        returns.push_back(e.target);
    }
    CHECK(returns == std::vector<std::uint32_t>{g.block_at(a.label("r1")), g.block_at(a.label("r2"))});
}

namespace {

struct TwoRegions {
    Assembly a;
    ControlFlowGraph g;
    std::vector<MethodRegion> regions;
};

// A calls B; when `cyclic`, B calls A back.
TwoRegions two_regions(bool cyclic) {
    TwoRegions t;
    t.a = assemble(std::string(R"(
        PUSH @done PUSH @A JUMP
        done: JUMPDEST STOP
        A: JUMPDEST PUSH @A2 PUSH @B JUMP
        A2: JUMPDEST JUMP
        B: JUMPDEST
    )") + (cyclic ? "PUSH @B2 PUSH @A JUMP\nB2: JUMPDEST JUMP\n" : "JUMP\n") + "end: STOP\n");
    t.g = build_cfg(decode(t.a.code));
    t.regions = {MethodRegion{0, t.a.label("A"), t.a.label("B")}, MethodRegion{1, t.a.label("B"), t.a.label("end")}};
    return t;
}

}  // namespace

TEST_CASE("call chains") {
    SUBCASE("A calls B") {
        const auto t = two_regions(false);
        CHECK(call_chains(t.g, t.regions, 0) == std::vector<Chain>{{0}, {0, 1}});
        CHECK(call_chains(t.g, t.regions, 1) == std::vector<Chain>{{1}});
    }
    SUBCASE("cycle is cut at the first revisit") {
        const auto t = two_regions(true);
        CHECK(call_chains(t.g, t.regions, 0, 5) == std::vector<Chain>{{0}, {0, 1}});
        CHECK(call_chains(t.g, t.regions, 1, 5) == std::vector<Chain>{{1}, {1, 0}});
        CHECK(call_chains(t.g, t.regions, 0, 1) == std::vector<Chain>{{0}});
    }
    SUBCASE("max_depth must be positive") {
        const auto t = two_regions(false);
        CHECK_THROWS(call_chains(t.g, t.regions, 0, 0));
    }
}

TEST_CASE("external calls appear in the call graph") {
    const auto a = assemble(R"(
        .begin m
        m: JUMPDEST
        PUSH1 0x20 PUSH1 0 PUSH1 0x20 PUSH1 0 PUSH1 1 GAS STATICCALL POP
        PUSH1 0 DUP1 DUP1 DUP1 CALLVALUE CALLER GAS CALL POP STOP
        .end m
    )");
    const auto g = build_cfg(decode(a.code));
    const std::vector<MethodRegion> regions{{0, 0, a.code.size()}};
    const auto edges = call_graph(g, regions);
    REQUIRE(edges.size() == 2);
    CHECK(edges[0].kind == CallGraphEdge::Kind::StaticCall);
    const auto& pre = std::get<ExternalCallee>(edges[0].callee);
    REQUIRE(pre.target.has_value());
    CHECK(*pre.target == 1);
    CHECK(edges[1].kind == CallGraphEdge::Kind::ExternalCall);
    CHECK_FALSE(std::get<ExternalCallee>(edges[1].callee).target.has_value());
}

TEST_CASE("taint origins follow stack and memory") {
    const auto a = assemble(R"(
        PUSH1 4 CALLDATALOAD PUSH1 1 ADD
        PUSH1 0x40 MSTORE
        PUSH1 0x40 MLOAD PUSH1 3 SSTORE
        PUSH1 7 PUSH1 4 SSTORE
        STOP
    )");
    const auto g = build_cfg(decode(a.code));
    const auto& s = g.stream();
    std::vector<std::size_t> sstores;
    for (const auto& ins : s.code())
        if (ins.op() == Op::SSTORE) sstores.push_back(ins.offset);
    REQUIRE(sstores.size() == 2);
    const auto& tainted = g.fact_at(sstores[0]).operands[1];
    CHECK(tainted.origins == Origins{2});
    CHECK(g.fact_at(sstores[1]).operands[1].origins.empty());

    FlowOptions opt;
    opt.blocked_sites.insert(5);  // the ADD
    const auto blocks = split_blocks(s);
    const auto ex = explore(s, blocks, opt);
    const auto i = s.index_at(sstores[0]);
    CHECK(ex.facts[i].operands[1].origins.empty());
}

TEST_CASE("determinism") {
    const auto bytes = assemble(R"(
        PUSH @r1 PUSH @f JUMP
        r1: JUMPDEST PUSH @r2 PUSH @f JUMP
        r2: JUMPDEST STOP
        f: JUMPDEST JUMP
    )").code;
    CHECK(build_cfg(decode(bytes)).dump() == build_cfg(decode(bytes)).dump());
}
