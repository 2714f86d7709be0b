#include "doctest.h"

#include "smvscan/assembler.hpp"
#include "smvscan/keccak.hpp"

#include <filesystem>
#include <fstream>

using namespace smvscan;

TEST_CASE("labels, selectors and push widths") {
    const auto a = assemble(R"(
        PUSH @end JUMP      ; forward reference
        PUSH @sel(transfer(address,uint256))
        PUSH 0 PUSH 256 PUSH3 1
        end: JUMPDEST STOP
    )");
    CHECK(a.code == parse_hex("61001256" "63a9059cbb" "6000" "610100" "62000001" "5b00"));
    CHECK(a.label("end") == 0x12);
    CHECK_THROWS_AS(a.label("nope"), AssemblyError);
}

TEST_CASE("method spans") {
    const auto a = assemble(".begin f\nPUSH1 1\n.begin g\nPOP\n.end g\nSTOP\n.end f\n");
    REQUIRE(a.span("f") != nullptr);
    CHECK(a.span("f")->start == 0);
    CHECK(a.span("f")->end == 4);
    CHECK(a.span("g")->start == 2);
    CHECK(a.span("g")->end == 3);
    CHECK_THROWS_AS(assemble(".begin f\nSTOP\n"), AssemblyError);
}

TEST_CASE("macros expand arguments and unique labels") {
    const auto a = assemble(R"(
        .macro GUARD
          $1 PUSH @%%ok JUMPI PUSH1 0 DUP1 REVERT
          %%ok: JUMPDEST
        .endm
        %GUARD CALLER
        %GUARD CALLVALUE
        STOP
    )");
    // CALLER PUSH2 ok JUMPI PUSH1 0 DUP1 REVERT JUMPDEST = 10 bytes per expansion.
    REQUIRE(a.code.size() == 21);
    CHECK(a.code[0] == 0x33);
    CHECK(a.code[10] == 0x34);
    CHECK(a.code[3] == 0x09);
    CHECK(a.code[13] == 0x13);
}

TEST_CASE("include splices a file once") {
    const auto dir = std::filesystem::temp_directory_path() / "smvscan_asm_include";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "lib.easm") << "lib: JUMPDEST STOP\n";
    const auto a = assemble(".include \"lib.easm\"\n.include \"lib.easm\"\nPUSH @lib\n", dir);
    CHECK(a.code == parse_hex("5b0061" "0000"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("metadata trailer is recognized by strip_trailer") {
    const auto a = assemble("PUSH1 1 PUSH1 0 SSTORE STOP\n.metadata\n");
    const auto s = strip_trailer(decode(a.code));
    CHECK(s.code_len() == 6);
    const auto& t = s.trailer();
    REQUIRE(t.size() == 0x35);
    CHECK(t[t.size() - 2] == 0x00);
    CHECK(t.back() == 0x33);
    CHECK_THROWS_AS(assemble(".metadata\nSTOP\n"), AssemblyError);
}

TEST_CASE("assembler errors") {
    CHECK_THROWS_AS(assemble("FOO"), AssemblyError);
    CHECK_THROWS_AS(assemble("PUSH1 0x100"), AssemblyError);
    CHECK_THROWS_AS(assemble("PUSH @missing"), AssemblyError);
    CHECK_THROWS_AS(assemble("x: STOP\nx: STOP"), AssemblyError);
    CHECK_THROWS_AS(assemble("%NOPE 1"), AssemblyError);
}
