#pragma once

#include "smvscan/opcodes.hpp"
#include "smvscan/word.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smvscan {

using Bytes = std::vector<std::uint8_t>;

struct Instruction {
    std::size_t offset = 0;
    std::uint8_t opcode = 0;
    /// Push operand, zero-padded on the right when the code ends mid-immediate.
    Word immediate = 0;
    /// Immediate bytes actually present in the code.
    std::uint8_t immediate_len = 0;
    bool truncated = false;

    std::size_t size() const noexcept { return 1u + immediate_len; }
    std::size_t end() const noexcept { return offset + size(); }
    Op op() const noexcept { return static_cast<Op>(opcode); }
    bool defined() const noexcept { return is_defined(opcode); }
    /// True for bytes that stop execution: halting opcodes and undefined bytes.
    bool halts() const noexcept { return is_halting(opcode) || !defined(); }
};

/// Decoded executable region plus any stripped metadata trailer.
class InstructionStream {
public:
    InstructionStream() = default;
    InstructionStream(std::vector<Instruction> code, Bytes executable, Bytes trailer);

    const std::vector<Instruction>& code() const noexcept { return code_; }
    std::size_t code_len() const noexcept { return bytes_.size(); }
    const Bytes& bytes() const noexcept { return bytes_; }
    const Bytes& trailer() const noexcept { return trailer_; }
    bool empty() const noexcept { return code_.empty(); }

    /// Index of the instruction starting exactly at `offset`, or npos.
    std::size_t index_at(std::size_t offset) const noexcept;
    /// Index of the instruction whose encoding covers `offset`, or npos.
    std::size_t owning_index(std::size_t offset) const noexcept;
    const Instruction* at(std::size_t offset) const noexcept;
    bool is_jumpdest(std::size_t offset) const noexcept;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    std::vector<Instruction> code_;
    Bytes bytes_;
    Bytes trailer_;
    std::vector<std::uint32_t> owner_;  // byte offset -> instruction index
};

/// Hex text to bytes. Accepts an optional 0x prefix and interior whitespace.
Bytes parse_hex(std::string_view text);
std::string to_hex(std::span<const std::uint8_t> bytes, bool prefix = true);

/// Linear-sweep decode of raw bytecode; undefined bytes become 1-byte INVALID
/// instructions and a truncated final push is zero-padded and flagged.
InstructionStream decode(std::span<const std::uint8_t> bytes);
InstructionStream decode_hex(std::string_view text);

/// Moves a compiler metadata blob (CBOR map whose length is given by the last
/// two bytes) into the trailer. Streams without one are returned unchanged.
InstructionStream strip_trailer(const InstructionStream& stream);

/// Executable bytes followed by the trailer; inverse of decode.
Bytes serialize(const InstructionStream& stream);

/// Reads a `.hex` (ASCII) or `.bin` (raw) file. Other extensions are sniffed.
Bytes read_bytecode_file(const std::filesystem::path& path);

std::string format_instruction(const Instruction& ins);

}  // namespace smvscan
