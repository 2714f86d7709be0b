#include "doctest.h"

#include "fixture_util.hpp"
#include "smvscan/assembler.hpp"
#include "smvscan/signature.hpp"

#include <numeric>
#include <random>
#include <set>

using namespace smvscan;

namespace {

MethodRegion whole(std::size_t len) {
    MethodRegion r;
    r.end = len;
    r.kind = RegionKind::Internal;
    return r;
}

SymbolSeq intra_of(std::string_view src) {
    const auto cfg = build_cfg(decode(assemble(src).code));
    return extract_intra(whole(cfg.stream().code_len()), cfg, {});
}

SymbolSeq S(std::string_view text) { return parse_symbols(text); }

}  // namespace

TEST_CASE("direct symbol mapping") {
    CHECK(intra_of("PUSH1 0 SLOAD PUSH1 0 SSTORE STOP") == S("R W"));
    CHECK(intra_of("PUSH1 0 MLOAD PUSH1 0 MSTORE GASPRICE GASLIMIT GAS LOG0 REVERT") == S("R W M2 M2 M2 E0 M1"));
    CHECK(intra_of("CALLVALUE CALLDATASIZE CALLDATALOAD CALLDATACOPY CALLCODE") == S("C1 C1 C1 C1 C1"));
    CHECK(intra_of("LT GT SLT SGT EQ ISZERO ADD MUL") == S("I I I I I I"));
    CHECK(intra_of("RETURNDATASIZE RETURNDATACOPY RETURN") == S("Re Re Re"));
}

TEST_CASE("access-control idiom prefix") {
    const auto seq = intra_of("CALLER ISZERO PUSH @ok JUMPI PUSH1 0 DUP1 REVERT ok: JUMPDEST STOP");
    REQUIRE(seq.size() >= 5);
    CHECK(SymbolSeq(seq.begin(), seq.begin() + 5) == S("C1 I C0 M1 C0"));
}

TEST_CASE("call and return jumps") {
    // pushed target: method call; target left on the stack by the caller: return
    CHECK(intra_of("PUSH @x JUMP x: JUMPDEST DUP1 JUMP") == S("C0 C0 Re"));
}

TEST_CASE("precompile calls") {
    const auto seq = intra_of("PUSH1 0x20 PUSH1 0x80 PUSH1 0x80 PUSH1 0x00 PUSH1 0x01 GAS STATICCALL STOP");
    CHECK(seq == S("M2 P1"));
    CHECK(intra_of("PUSH1 0 DUP1 DUP1 DUP1 DUP1 PUSH1 0x09 GAS CALL") == S("M2 P9"));
    CHECK(intra_of("PUSH1 0 DUP1 DUP1 DUP1 DUP1 PUSH1 0x0a GAS CALL") == S("M2 C0"));
    CHECK(intra_of("PUSH1 0 DUP1 DUP1 DUP1 PUSH1 0x01 GAS DELEGATECALL") == S("M2 C0"));
    CHECK(intra_of("PUSH1 0 DUP1 DUP1 DUP1 DUP1 CALLDATALOAD GAS CALL") == S("C1 M2 C0"));
}

TEST_CASE("symbol text round-trip and validation") {
    CHECK(S("R W I M1").size() == 4);
    CHECK(format_symbols(S("  R\tW  Re ")) == "R W Re");
    CHECK(format_symbols({}) == "");
    CHECK(parse_symbols("").empty());
    try {
        parse_symbols("R X", "Lib.f@1.0");
        FAIL("expected InvalidSymbol");
    } catch (const InvalidSymbol& e) {
        CHECK(e.token() == "X");
        CHECK(std::string(e.what()).find("Lib.f@1.0") != std::string::npos);
    }
    for (std::size_t i = 0; i < kSymbolCount; ++i) {
        const auto s = static_cast<Symbol>(i);
        CHECK(parse_symbol(to_string(s)) == s);
    }
    CHECK_FALSE(parse_symbol("P0"));
    CHECK_FALSE(parse_symbol("c0"));
}

TEST_CASE("database method signatures") {
    SubcontractRecord rec;
    rec.key = {"ERC20", "4.8.0", "transfer"};
    rec.intra_sig = "R W I M1";
    rec.chain_sig = "R W I M1 Re";
    const auto sig = signature_of_db_method(rec);
    CHECK(sig.intra.size() == 4);
    CHECK(sig.chain.size() == 5);
    rec.intra_sig = "R X";
    CHECK_THROWS_AS(signature_of_db_method(rec), InvalidSymbol);

    const auto* transfer = testing::fixture_db().find("ERC20", "transfer");
    REQUIRE(transfer != nullptr);
    const auto t = signature_of_db_method(*transfer);
    CHECK(std::count(t.intra.begin(), t.intra.end(), Symbol::W) >= 1);
}

TEST_CASE("chains concatenate callees in call-graph order") {
    // A calls B then C; B and C are leaves.
    const auto a = assemble(R"(
        PUSH1 0x00 CALLDATALOAD PUSH1 0xe0 SHR
        DUP1 PUSH4 @sel(a()) EQ PUSH @A JUMPI
        PUSH1 0x00 DUP1 REVERT
        A: JUMPDEST
          PUSH @ra PUSH @B JUMP
        ra: JUMPDEST
          PUSH @rc PUSH @C JUMP
        rc: JUMPDEST STOP
        B: JUMPDEST PUSH1 0x01 SLOAD POP JUMP
        C: JUMPDEST CALLER PUSH1 0x02 SSTORE LOG0 JUMP
    )");
    const auto cfg = build_cfg(decode(a.code));
    const auto regions = recover_heuristic(cfg);
    REQUIRE(regions.size() == 3);
    const auto chains = all_call_chains(cfg, regions);
    const auto sigs = extract_signatures(cfg, regions, chains);
    const auto& A = sigs[0];
    const auto& B = sigs[1];
    const auto& C = sigs[2];
    CHECK(B.chain == B.intra);
    CHECK(C.chain == C.intra);
    SymbolSeq want = A.intra;
    want.insert(want.end(), B.intra.begin(), B.intra.end());
    want.insert(want.end(), C.intra.begin(), C.intra.end());
    CHECK(A.chain == want);
    CHECK(B.intra == S("C0 R Re"));
    CHECK(C.intra == S("C0 C1 W E0 Re"));
}

TEST_CASE("nested regions keep their bytes") {
    const auto a = assemble_file(testing::source_dir() / "fixtures/src/contracts/token_hub.easm");
    const auto cfg = build_cfg(strip_trailer(decode(a.code)));
    const auto regions = recover_heuristic(cfg);
    const auto sigs = extract_signatures(cfg, regions, all_call_chains(cfg, regions));
    const auto* validate = testing::fixture_db().find("MerkleProof", "validate");
    REQUIRE(validate != nullptr);
    CHECK(format_symbols(sigs[1].intra) == validate->intra_sig);
    // _handle's intra stops where validate begins and resumes after it
    const auto whole_span = extract_intra(regions[0], cfg, {});
    CHECK(whole_span.size() == sigs[0].intra.size() + sigs[1].intra.size());
}

TEST_CASE("signature properties over the fixture corpus") {
    std::mt19937 rng(3);
    for (const auto& name : testing::contract_names()) {
        CAPTURE(name);
        const auto cfg = build_cfg(strip_trailer(decode(read_bytecode_file(testing::contracts_dir() / (name + ".hex")))));
        const auto regions = recover_heuristic(cfg);
        const auto chains = all_call_chains(cfg, regions);
        const auto sigs = extract_signatures(cfg, regions, chains);
        REQUIRE(sigs.size() == regions.size());
        for (const auto& s : sigs) {
            REQUIRE(s.chain.size() >= s.intra.size());
            CHECK(std::equal(s.intra.begin(), s.intra.end(), s.chain.begin()));
            for (auto sym : s.chain) CHECK(static_cast<std::size_t>(sym) < kSymbolCount);
        }
        CHECK(extract_signatures(cfg, regions, chains).size() == sigs.size());
        const auto again = extract_signatures(cfg, regions, chains);
        for (std::size_t i = 0; i < sigs.size(); ++i) CHECK(format_symbols(again[i].chain) == format_symbols(sigs[i].chain));

        // Deleting one instruction never lengthens a region's sequence. JUMP
        // flips between C0 and Re with its preceding PUSH, so those two are
        // compared as one class; every other symbol is a sub-multiset.
        const auto& stream = cfg.stream();
        for (const auto& r : regions) {
            std::vector<std::size_t> starts;
            for (std::size_t i = 0; i < stream.code().size(); ++i)
                if (stream.code()[i].offset >= r.start && stream.code()[i].offset < r.end) starts.push_back(i);
            if (starts.size() < 2) continue;
            const auto drop = starts[rng() % starts.size()];
            Bytes bytes;
            for (auto i : starts) {
                if (i == drop) continue;
                const auto& ins = stream.code()[i];
                bytes.insert(bytes.end(), stream.bytes().begin() + static_cast<std::ptrdiff_t>(ins.offset),
                             stream.bytes().begin() + static_cast<std::ptrdiff_t>(ins.end()));
            }
            auto symbols = [](const InstructionStream& st, const std::vector<std::size_t>& idx) {
                std::multiset<Symbol> out;
                for (auto i : idx)
                    if (auto s = classify(st, i)) out.insert(*s == Symbol::Re ? Symbol::C0 : *s);
                return out;
            };
            const auto shrunk = decode(bytes);
            std::vector<std::size_t> all(shrunk.code().size());
            std::iota(all.begin(), all.end(), 0);
            const auto small = symbols(shrunk, all);
            const auto big = symbols(stream, starts);
            CHECK(small.size() <= big.size());
            for (auto s : small) CHECK(small.count(s) <= big.count(s));
        }
    }
}
