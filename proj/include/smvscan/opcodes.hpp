#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

namespace smvscan {

enum class Op : std::uint8_t {
    STOP = 0x00, ADD = 0x01, MUL = 0x02, SUB = 0x03, DIV = 0x04, SDIV = 0x05, MOD = 0x06,
    SMOD = 0x07, ADDMOD = 0x08, MULMOD = 0x09, EXP = 0x0a, SIGNEXTEND = 0x0b,
    LT = 0x10, GT = 0x11, SLT = 0x12, SGT = 0x13, EQ = 0x14, ISZERO = 0x15, AND = 0x16,
    OR = 0x17, XOR = 0x18, NOT = 0x19, BYTE = 0x1a, SHL = 0x1b, SHR = 0x1c, SAR = 0x1d,
    SHA3 = 0x20,
    ADDRESS = 0x30, BALANCE = 0x31, ORIGIN = 0x32, CALLER = 0x33, CALLVALUE = 0x34,
    CALLDATALOAD = 0x35, CALLDATASIZE = 0x36, CALLDATACOPY = 0x37, CODESIZE = 0x38,
    CODECOPY = 0x39, GASPRICE = 0x3a, EXTCODESIZE = 0x3b, EXTCODECOPY = 0x3c,
    RETURNDATASIZE = 0x3d, RETURNDATACOPY = 0x3e, EXTCODEHASH = 0x3f,
    BLOCKHASH = 0x40, COINBASE = 0x41, TIMESTAMP = 0x42, NUMBER = 0x43, PREVRANDAO = 0x44,
    GASLIMIT = 0x45, CHAINID = 0x46, SELFBALANCE = 0x47, BASEFEE = 0x48, BLOBHASH = 0x49,
    BLOBBASEFEE = 0x4a,
    POP = 0x50, MLOAD = 0x51, MSTORE = 0x52, MSTORE8 = 0x53, SLOAD = 0x54, SSTORE = 0x55,
    JUMP = 0x56, JUMPI = 0x57, PC = 0x58, MSIZE = 0x59, GAS = 0x5a, JUMPDEST = 0x5b,
    TLOAD = 0x5c, TSTORE = 0x5d, MCOPY = 0x5e, PUSH0 = 0x5f,
    PUSH1 = 0x60, PUSH32 = 0x7f,
    DUP1 = 0x80, DUP16 = 0x8f,
    SWAP1 = 0x90, SWAP16 = 0x9f,
    LOG0 = 0xa0, LOG1 = 0xa1, LOG2 = 0xa2, LOG3 = 0xa3, LOG4 = 0xa4,
    CREATE = 0xf0, CALL = 0xf1, CALLCODE = 0xf2, RETURN = 0xf3, DELEGATECALL = 0xf4,
    CREATE2 = 0xf5, STATICCALL = 0xfa, REVERT = 0xfd, INVALID = 0xfe, SELFDESTRUCT = 0xff,
};

struct OpInfo {
    std::string_view name;  // empty for undefined opcodes
    std::uint8_t pops = 0;
    std::uint8_t pushes = 0;
};

/// Static facts about a raw opcode byte. Undefined bytes report an empty name.
const OpInfo& op_info(std::uint8_t byte) noexcept;

/// Mnemonic for display; undefined bytes render as "INVALID".
std::string_view mnemonic(std::uint8_t byte) noexcept;

/// Reverse lookup for the assembler ("PUSH1", "DUP3", ...).
std::optional<std::uint8_t> opcode_from_name(std::string_view name) noexcept;

constexpr bool is_push(std::uint8_t b) noexcept { return b >= 0x60 && b <= 0x7f; }
constexpr unsigned push_size(std::uint8_t b) noexcept { return is_push(b) ? b - 0x5f : 0; }
constexpr bool is_dup(std::uint8_t b) noexcept { return b >= 0x80 && b <= 0x8f; }
constexpr bool is_swap(std::uint8_t b) noexcept { return b >= 0x90 && b <= 0x9f; }
constexpr bool is_log(std::uint8_t b) noexcept { return b >= 0xa0 && b <= 0xa4; }

inline bool is_defined(std::uint8_t b) noexcept { return !op_info(b).name.empty(); }

/// Instructions after which control never falls through.
constexpr bool is_halting(std::uint8_t b) noexcept {
    return b == 0x00 || b == 0x56 || b == 0xf3 || b == 0xfd || b == 0xfe || b == 0xff;
}

/// Instructions that end a basic block (halting ones plus JUMPI).
constexpr bool ends_block(std::uint8_t b) noexcept { return is_halting(b) || b == 0x57; }

constexpr bool is_external_call(std::uint8_t b) noexcept {
    return b == 0xf1 || b == 0xf2 || b == 0xf4 || b == 0xfa;
}

}  // namespace smvscan
