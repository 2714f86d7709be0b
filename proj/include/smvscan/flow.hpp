#pragma once

// Control-flow and data-flow recovery over an instruction stream.
//
// Jump targets are resolved by emulating an abstract stack (constant-or-top
// values, 32 entries deep) per calling context. The context of a block is the
// set of jump-destination constants currently on the stack, which separates
// return addresses of different callers of the same internal function. The
// same pass carries origin sets (which instructions a value depends on) and
// mapping-slot provenance, so storage and taint facts come out of one
// fixpoint.

#include "smvscan/bytecode.hpp"
#include "smvscan/region.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace smvscan {

inline constexpr std::uint32_t kUnknownBlock = 0xffffffffu;
inline constexpr std::size_t kMaxAbstractStack = 32;

enum class EdgeKind { Fallthrough, Jump, BranchTaken, Call, Return, CallReturn, Unknown };
std::string_view to_string(EdgeKind k) noexcept;

struct Edge {
    std::uint32_t target = kUnknownBlock;
    EdgeKind kind = EdgeKind::Fallthrough;

    auto operator<=>(const Edge&) const = default;
};

struct BasicBlock {
    std::uint32_t id = 0;
    std::size_t start = 0;  // byte offset of first instruction
    std::size_t end = 0;    // byte offset one past the last instruction
    std::size_t first = 0;  // instruction index range [first, last)
    std::size_t last = 0;
    std::vector<Edge> successors;
    bool reachable = false;
};

/// Sorted set of instruction offsets a value depends on.
using Origins = std::vector<std::uint32_t>;

enum class ValueTag : std::uint8_t { None, CalldataWord0, Selector, SelectorEq, SlotHash };

struct AbstractValue {
    enum class Shape : std::uint8_t { Bottom, Const, Top };

    Shape shape = Shape::Bottom;
    Word konst = 0;
    ValueTag tag = ValueTag::None;
    Word tag_value = 0;  // selector for SelectorEq, base slot for SlotHash
    Origins origins;

    static AbstractValue top(Origins o = {});
    static AbstractValue constant(const Word& w);

    bool is_const() const noexcept { return shape == Shape::Const; }
    /// Lattice join; returns true when this value changed.
    bool join(const AbstractValue& other);
    bool operator==(const AbstractValue&) const = default;
};

/// Joined operand values seen at one instruction over all contexts. For JUMP
/// sites the snapshot covers the top 17 stack entries (target first).
struct SiteFact {
    bool reached = false;
    std::vector<AbstractValue> operands;  // top of stack first
};

/// An internal call: a JUMP whose block left a pushed return address on the stack.
struct CallSite {
    std::size_t site = 0;  // offset of the JUMP
    std::uint32_t block = 0;
    std::uint32_t callee_block = 0;
    std::uint32_t return_block = 0;
    /// Stack depth (0 = just below the jump target) of the return address.
    std::size_t return_depth = 0;
};

struct FlowOptions {
    /// Instructions whose outputs carry no origins (removes data-flow edges).
    std::set<std::size_t> blocked_sites;
    std::size_t max_contexts_per_block = 64;
    std::size_t max_transfers = 200000;
};

struct Exploration {
    std::vector<std::vector<Edge>> successors;  // per block
    std::vector<bool> reachable;
    std::vector<SiteFact> facts;  // per instruction index
    std::vector<CallSite> call_sites;
    std::map<std::uint32_t, std::uint32_t> public_entries;
    bool truncated = false;
};

/// Basic blocks by linear sweep: leaders at 0, every JUMPDEST, and after any
/// block-ending instruction. Edges are left empty.
std::vector<BasicBlock> split_blocks(const InstructionStream& stream);

Exploration explore(const InstructionStream& stream, const std::vector<BasicBlock>& blocks,
                    const FlowOptions& options = {});

class ControlFlowGraph {
public:
    ControlFlowGraph() = default;
    ControlFlowGraph(std::shared_ptr<const InstructionStream> stream, std::vector<BasicBlock> blocks,
                     Exploration exploration);

    const InstructionStream& stream() const noexcept { return *stream_; }
    std::shared_ptr<const InstructionStream> stream_ptr() const noexcept { return stream_; }
    const std::vector<BasicBlock>& blocks() const noexcept { return blocks_; }
    std::uint32_t entry() const noexcept { return 0; }
    const std::map<std::uint32_t, std::uint32_t>& public_entries() const noexcept { return public_entries_; }
    const std::vector<CallSite>& call_sites() const noexcept { return call_sites_; }
    const SiteFact& fact_at(std::size_t offset) const;
    bool truncated() const noexcept { return truncated_; }

    /// Block containing the instruction at `offset`, or kUnknownBlock.
    std::uint32_t block_of(std::size_t offset) const noexcept;
    /// Block starting exactly at `offset`, or kUnknownBlock.
    std::uint32_t block_at(std::size_t offset) const noexcept;
    std::vector<std::uint32_t> predecessors(std::uint32_t block) const;

    /// `blockN -> blockM kind` lines for every edge.
    std::string dump() const;

private:
    std::shared_ptr<const InstructionStream> stream_;
    std::vector<BasicBlock> blocks_;
    std::vector<SiteFact> facts_;
    std::vector<CallSite> call_sites_;
    std::map<std::uint32_t, std::uint32_t> public_entries_;
    std::vector<std::uint32_t> block_index_;  // instruction index -> block
    bool truncated_ = false;
};

ControlFlowGraph build_cfg(std::shared_ptr<const InstructionStream> stream);
ControlFlowGraph build_cfg(const InstructionStream& stream);

/// Storage-slot descriptor, also used for the pseudo-slots of taint sinks.
struct SlotDescriptor {
    enum class Kind : std::uint8_t { Constant, Hashed, Opaque, EthBalance, CallTarget };
    Kind kind = Kind::Opaque;
    Word value = 0;  // slot for Constant, base slot for Hashed

    static SlotDescriptor constant(const Word& w) { return {Kind::Constant, w}; }
    static SlotDescriptor hashed(const Word& base) { return {Kind::Hashed, base}; }
    static SlotDescriptor opaque() { return {Kind::Opaque, 0}; }
    static SlotDescriptor eth_balance() { return {Kind::EthBalance, 0}; }
    static SlotDescriptor call_target() { return {Kind::CallTarget, 0}; }

    /// Slot identity for conflict joins: opaque slots never match anything.
    bool same_slot(const SlotDescriptor& o) const noexcept {
        return kind != Kind::Opaque && kind == o.kind && value == o.value;
    }
    bool operator==(const SlotDescriptor&) const = default;
    bool operator<(const SlotDescriptor& o) const {
        return kind != o.kind ? kind < o.kind : value < o.value;
    }
    std::string to_string() const;
};

SlotDescriptor slot_of(const AbstractValue& slot_operand);

struct StorageAccess {
    enum class Kind { Read, Write };
    SlotDescriptor slot;
    Kind kind = Kind::Read;
    std::size_t site = 0;
};

std::vector<StorageAccess> storage_accesses(const ControlFlowGraph& cfg);

// ---------------------------------------------------------------------------
// Region-level call graph.

struct ExternalCallee {
    std::size_t site = 0;
    std::uint8_t opcode = 0;
    std::optional<Word> target;
};

struct CallGraphEdge {
    enum class Kind { InternalJump, ExternalCall, DelegateCall, StaticCall };
    std::uint32_t caller = 0;
    std::variant<std::uint32_t, ExternalCallee> callee;
    Kind kind = Kind::InternalJump;
    std::size_t site = 0;

    bool internal() const noexcept { return kind == Kind::InternalJump; }
    std::uint32_t callee_region() const { return std::get<std::uint32_t>(callee); }
};

/// Region-level call edges: internal calls (call idiom), nested regions that
/// are never called explicitly, and external message calls.
std::vector<CallGraphEdge> call_graph(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions);

/// Sorted, de-duplicated internal callees per region id.
std::vector<std::vector<std::uint32_t>> internal_callees(const ControlFlowGraph& cfg,
                                                         const std::vector<MethodRegion>& regions);

using Chain = std::vector<std::uint32_t>;

/// Every acyclic chain (as a prefix path) rooted at `root`, in depth-first
/// order with callees visited by ascending id, truncated at `max_depth`.
std::vector<Chain> call_chains(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions,
                               std::uint32_t root, std::size_t max_depth = 5);

/// call_chains for every region, indexed by region id.
std::vector<std::vector<Chain>> all_call_chains(const ControlFlowGraph& cfg,
                                                const std::vector<MethodRegion>& regions,
                                                std::size_t max_depth = 5);

}  // namespace smvscan
