#pragma once

// Vulnerability indicators over reuse matches, confirmed by entry
// reachability and taint of state variables.

#include "smvscan/database.hpp"
#include "smvscan/flow.hpp"
#include "smvscan/matcher.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <string_view>
#include <vector>

namespace smvscan {

enum class SmvType { VariableConflict, LackOfSecurityCheck };
std::string_view to_string(SmvType t) noexcept;

struct Indicator {
    SmvType rule = SmvType::LackOfSecurityCheck;
    std::uint32_t site = 0;  // the matched region the rule fires on
    /// Conflict: the other matched region. Lack-of-check: the caller region.
    std::uint32_t via = 0;
    std::vector<std::size_t> matches;  // indices into the match list
    std::optional<std::size_t> knowledge;  // index into KnowledgeBase::entries
    std::vector<SlotDescriptor> common_slots;  // conflicts only
    std::vector<std::size_t> call_sites;       // unguarded call sites (lack-of-check)
};

struct DetectorContext {
    const ControlFlowGraph& cfg;
    const std::vector<MethodRegion>& regions;
    const std::vector<MethodSignature>& signatures;
    const std::vector<std::vector<Chain>>& chains;  // all_call_chains
    const std::vector<ReuseMatch>& matches;
    const Database& db;
    const KnowledgeBase& kb;
    MatchOptions thresholds;
};

std::vector<Indicator> find_indicators(const DetectorContext& ctx);

/// Shortest region-level path from a public region to `target` over internal
/// call-graph edges.
std::optional<std::vector<std::uint32_t>> entry_reachability(const DetectorContext& ctx, std::uint32_t target);

/// Slots written (or value/target pseudo-slots of external calls) inside the
/// indicator site's call chains with an operand derived from a message-call
/// source. Conflicts keep only their common slots.
std::set<SlotDescriptor> taint_state_variables(const DetectorContext& ctx, const Indicator& indicator);

struct VulnerabilityTrace {
    SmvType type = SmvType::LackOfSecurityCheck;
    std::uint32_t entry = 0;  // public region
    std::optional<std::uint32_t> entry_selector;
    std::vector<std::uint32_t> chain;  // region ids, starting at entry
    std::vector<SlotDescriptor> affected;
    std::size_t indicator = 0;
    struct Counterpart {
        std::uint32_t entry = 0;
        std::optional<std::uint32_t> entry_selector;
        std::vector<std::uint32_t> chain;
    };
    std::optional<Counterpart> counterpart;  // conflicts: the other side
};

struct Detection {
    std::vector<Indicator> indicators;
    std::vector<VulnerabilityTrace> traces;
    /// Indicators with an entry path but no tainted state variable.
    std::vector<std::size_t> warnings;
    /// Indicators with no entry path.
    std::vector<std::size_t> unreachable;
};

Detection detect(const DetectorContext& ctx);

/// True when the offset holds a message-call source instruction.
bool is_taint_source(const InstructionStream& stream, std::size_t offset) noexcept;

}  // namespace smvscan
