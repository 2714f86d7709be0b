#pragma once

// Method signatures over the 18-symbol opcode-feature alphabet.

#include "smvscan/flow.hpp"
#include "smvscan/region.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smvscan {

enum class Symbol : std::uint8_t { R, W, C0, C1, I, Re, E0, M1, M2, P1, P2, P3, P4, P5, P6, P7, P8, P9 };
inline constexpr std::size_t kSymbolCount = 18;

std::string_view to_string(Symbol s) noexcept;
std::optional<Symbol> parse_symbol(std::string_view token) noexcept;

using SymbolSeq = std::vector<Symbol>;

/// Space-separated tokens; empty sequence gives "".
std::string format_symbols(const SymbolSeq& seq);
/// Inverse of format_symbols, tolerant of any whitespace. Throws InvalidSymbol
/// naming the token and `record`.
SymbolSeq parse_symbols(std::string_view text, const std::string& record = {});

struct MethodSignature {
    std::uint32_t region_id = 0;
    SymbolSeq intra;
    SymbolSeq chain;
};

/// Symbol for one instruction, if any. `precompile` is the constant call
/// target for CALL/STATICCALL when known.
std::optional<Symbol> classify(const InstructionStream& stream, std::size_t index,
                               std::optional<std::uint64_t> precompile = std::nullopt);

/// Symbols of the region's own instructions in address order. Bytes of
/// regions nested inside it belong to those regions and are skipped.
SymbolSeq extract_intra(const MethodRegion& region, const ControlFlowGraph& cfg,
                        const std::vector<MethodRegion>& regions);

/// intra(root) followed by the intra of each deeper chain's last member, in
/// the depth-first order produced by call_chains.
SymbolSeq extract_chain(const std::vector<Chain>& chains, const std::vector<SymbolSeq>& intra_map);

std::vector<MethodSignature> extract_signatures(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions,
                                                const std::vector<std::vector<Chain>>& chains);

}  // namespace smvscan
