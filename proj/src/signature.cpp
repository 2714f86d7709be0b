#include "smvscan/signature.hpp"

#include "smvscan/error.hpp"

#include <cctype>

namespace smvscan {

namespace {

constexpr std::array<std::string_view, kSymbolCount> kNames = {
    "R", "W", "C0", "C1", "I", "Re", "E0", "M1", "M2", "P1", "P2", "P3", "P4", "P5", "P6", "P7", "P8", "P9"};

}  // namespace

std::string_view to_string(Symbol s) noexcept { return kNames[static_cast<std::size_t>(s)]; }

std::optional<Symbol> parse_symbol(std::string_view token) noexcept {
    for (std::size_t i = 0; i < kNames.size(); ++i)
        if (kNames[i] == token) return static_cast<Symbol>(i);
    return std::nullopt;
}

std::string format_symbols(const SymbolSeq& seq) {
    std::string out;
    for (auto s : seq) {
        if (!out.empty()) out += ' ';
        out += to_string(s);
    }
    return out;
}

SymbolSeq parse_symbols(std::string_view text, const std::string& record) {
    SymbolSeq out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        if (j > i) {
            const auto tok = text.substr(i, j - i);
            const auto s = parse_symbol(tok);
            if (!s) throw InvalidSymbol(std::string(tok), record);
            out.push_back(*s);
        }
        i = j;
    }
    return out;
}

std::optional<Symbol> classify(const InstructionStream& stream, std::size_t index,
                               std::optional<std::uint64_t> precompile) {
    const auto& ins = stream.code()[index];
    switch (ins.op()) {
        case Op::MLOAD: case Op::SLOAD:
            return Symbol::R;
        case Op::MSTORE: case Op::SSTORE:
            return Symbol::W;
        case Op::JUMP:
            // A jump to a target pushed right before it is a call or local
            // jump; anything else is the return idiom.
            if (index > 0 && is_push(stream.code()[index - 1].opcode)) return Symbol::C0;
            return Symbol::Re;
        case Op::JUMPI: case Op::JUMPDEST: case Op::DELEGATECALL:
            return Symbol::C0;
        case Op::CALL: case Op::STATICCALL:
            if (precompile && *precompile >= 1 && *precompile <= 9)
                return static_cast<Symbol>(static_cast<std::size_t>(Symbol::P1) + *precompile - 1);
            return Symbol::C0;
        case Op::CALLER: case Op::CALLDATASIZE: case Op::CALLDATALOAD: case Op::CALLVALUE:
        case Op::CALLDATACOPY: case Op::CALLCODE:
            return Symbol::C1;
        case Op::LT: case Op::GT: case Op::SLT: case Op::SGT: case Op::EQ: case Op::ISZERO:
            return Symbol::I;
        case Op::RETURNDATASIZE: case Op::RETURN: case Op::RETURNDATACOPY:
            return Symbol::Re;
        case Op::REVERT:
            return Symbol::M1;
        case Op::GAS: case Op::GASPRICE: case Op::GASLIMIT:
            return Symbol::M2;
        default:
            if (is_log(ins.opcode)) return Symbol::E0;
            return std::nullopt;
    }
}

SymbolSeq extract_intra(const MethodRegion& region, const ControlFlowGraph& cfg,
                        const std::vector<MethodRegion>& regions) {
    const auto& s = cfg.stream();
    SymbolSeq out;
    for (std::size_t i = 0; i < s.code().size(); ++i) {
        const auto& ins = s.code()[i];
        if (!region.contains(ins.offset)) continue;
        const bool in_child = std::any_of(regions.begin(), regions.end(), [&](const MethodRegion& c) {
            return region.contains(c) && c.contains(ins.offset);
        });
        if (in_child) continue;
        std::optional<std::uint64_t> target;
        if (ins.op() == Op::CALL || ins.op() == Op::STATICCALL) {
            const auto& f = cfg.fact_at(ins.offset);
            if (f.operands.size() > 1 && f.operands[1].is_const()) target = as_offset(f.operands[1].konst);
        }
        if (auto sym = classify(s, i, target)) out.push_back(*sym);
    }
    return out;
}

SymbolSeq extract_chain(const std::vector<Chain>& chains, const std::vector<SymbolSeq>& intra_map) {
    SymbolSeq out;
    for (const auto& c : chains) {
        if (c.empty()) continue;
        const auto& part = intra_map.at(c.back());
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

std::vector<MethodSignature> extract_signatures(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions,
                                                const std::vector<std::vector<Chain>>& chains) {
    std::vector<SymbolSeq> intra(regions.size());
    for (const auto& r : regions) intra[r.id] = extract_intra(r, cfg, regions);
    std::vector<MethodSignature> out;
    out.reserve(regions.size());
    for (const auto& r : regions) out.push_back({r.id, intra[r.id], extract_chain(chains.at(r.id), intra)});
    return out;
}

}  // namespace smvscan
