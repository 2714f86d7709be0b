#pragma once

// Small EVM assembler used to author fixture contracts.
//
// Source syntax, one or more items per line:
//   label:                 define a label at the current offset
//   PUSH1 0x80             explicit-width push
//   PUSH 1000              minimal-width push (PUSH1 for zero)
//   PUSH @label            PUSH2 of a label offset
//   PUSH @sel(f(uint256))  PUSH4 of a method selector
//   .begin NAME / .end NAME   record a method span (the ground-truth map)
//   .include "file"        splice another source file once
//   .byte 0x01 0x02        raw bytes
//   .metadata              append a solc-style CBOR metadata trailer
//   .macro NAME ... .endm  macro definition; `%NAME a b` expands it with
//                          $1.. substituted and %%x made unique per expansion.
//                          A call may appear mid-line and takes as many
//                          arguments as the highest $n in its body.
// Comments start with ';' or '//'.

#include "smvscan/bytecode.hpp"
#include "smvscan/error.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace smvscan {

class AssemblyError : public Error {
public:
    using Error::Error;
};

struct MethodSpan {
    std::string name;
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // exclusive
};

struct Assembly {
    Bytes code;
    std::map<std::string, std::size_t> labels;
    std::vector<MethodSpan> spans;

    const MethodSpan* span(std::string_view name) const;
    std::size_t label(std::string_view name) const;
};

Assembly assemble(std::string_view source, const std::filesystem::path& include_dir = {});
Assembly assemble_file(const std::filesystem::path& path);

}  // namespace smvscan
