#include "smvscan/flow.hpp"

#include <algorithm>
#include <deque>
#include <sstream>
#include <stdexcept>

namespace smvscan {

std::string_view to_string(EdgeKind k) noexcept {
    switch (k) {
        case EdgeKind::Fallthrough: return "fallthrough";
        case EdgeKind::Jump: return "jump";
        case EdgeKind::BranchTaken: return "branch-taken";
        case EdgeKind::Call: return "call";
        case EdgeKind::Return: return "return";
        case EdgeKind::CallReturn: return "call-return";
        case EdgeKind::Unknown: return "unknown";
    }
    return "?";
}

namespace {

bool merge_origins(Origins& into, const Origins& from) {
    if (from.empty()) return false;
    Origins merged;
    merged.reserve(into.size() + from.size());
    std::set_union(into.begin(), into.end(), from.begin(), from.end(), std::back_inserter(merged));
    if (merged.size() == into.size()) return false;
    into = std::move(merged);
    return true;
}

Origins union_of(std::initializer_list<const Origins*> sets) {
    Origins out;
    for (const auto* s : sets) merge_origins(out, *s);
    return out;
}

}  // namespace

AbstractValue AbstractValue::top(Origins o) {
    AbstractValue v;
    v.shape = Shape::Top;
    v.origins = std::move(o);
    return v;
}

AbstractValue AbstractValue::constant(const Word& w) {
    AbstractValue v;
    v.shape = Shape::Const;
    v.konst = w;
    return v;
}

bool AbstractValue::join(const AbstractValue& other) {
    if (other.shape == Shape::Bottom) return false;
    if (shape == Shape::Bottom) {
        *this = other;
        return true;
    }
    bool changed = false;
    if (shape == Shape::Const && (other.shape != Shape::Const || other.konst != konst)) {
        shape = Shape::Top;
        konst = 0;
        changed = true;
    }
    if (tag != ValueTag::None && (other.tag != tag || other.tag_value != tag_value)) {
        tag = ValueTag::None;
        tag_value = 0;
        changed = true;
    }
    changed |= merge_origins(origins, other.origins);
    return changed;
}

// ---------------------------------------------------------------------------

std::vector<BasicBlock> split_blocks(const InstructionStream& stream) {
    std::vector<BasicBlock> blocks;
    const auto& code = stream.code();
    std::size_t i = 0;
    while (i < code.size()) {
        BasicBlock b;
        b.id = static_cast<std::uint32_t>(blocks.size());
        b.first = i;
        b.start = code[i].offset;
        ++i;
        if (!ends_block(code[i - 1].opcode) && code[i - 1].defined()) {
            while (i < code.size() && code[i].op() != Op::JUMPDEST) {
                ++i;
                if (ends_block(code[i - 1].opcode) || !code[i - 1].defined()) break;
            }
        }
        b.last = i;
        b.end = code[i - 1].end();
        blocks.push_back(std::move(b));
    }
    return blocks;
}

namespace {

struct State {
    std::vector<AbstractValue> stack;  // back() is the top
    Origins below;                     // origins of entries dropped off the bottom
    std::map<std::uint64_t, AbstractValue> memory;
    Origins mem_unknown;  // origins written at unresolved offsets

    AbstractValue pop() {
        if (stack.empty()) return AbstractValue::top(below);
        auto v = std::move(stack.back());
        stack.pop_back();
        return v;
    }
    AbstractValue peek(std::size_t depth) const {
        if (depth >= stack.size()) return AbstractValue::top(below);
        return stack[stack.size() - 1 - depth];
    }
    void push(AbstractValue v) {
        stack.push_back(std::move(v));
        if (stack.size() > kMaxAbstractStack) {
            merge_origins(below, stack.front().origins);
            stack.erase(stack.begin());
        }
    }
    void materialize(std::size_t n) {
        while (stack.size() < n) stack.insert(stack.begin(), AbstractValue::top(below));
    }

    bool join(const State& o) {
        bool changed = false;
        const std::size_t n = std::min(stack.size(), o.stack.size());
        if (stack.size() > n) {
            for (std::size_t i = 0; i < stack.size() - n; ++i) merge_origins(below, stack[i].origins);
            stack.erase(stack.begin(), stack.begin() + static_cast<std::ptrdiff_t>(stack.size() - n));
            changed = true;
        }
        for (std::size_t i = 0; i + n < o.stack.size(); ++i) changed |= merge_origins(below, o.stack[i].origins);
        const std::size_t off = o.stack.size() - n;
        for (std::size_t i = 0; i < n; ++i) changed |= stack[i].join(o.stack[off + i]);
        changed |= merge_origins(below, o.below);
        // Memory absent from one side is untainted but not constant.
        for (auto& [k, v] : memory) {
            auto it = o.memory.find(k);
            if (it != o.memory.end()) changed |= v.join(it->second);
            else changed |= v.join(AbstractValue::top());
        }
        for (const auto& [k, v] : o.memory) {
            if (memory.count(k)) continue;
            memory.emplace(k, AbstractValue::top(v.origins));
            changed = true;
        }
        changed |= merge_origins(mem_unknown, o.mem_unknown);
        return changed;
    }

    Origins memory_origins(std::optional<std::uint64_t> start, std::optional<std::uint64_t> len) const {
        Origins out = mem_unknown;
        for (const auto& [k, v] : memory) {
            if (start && len && (k + 32 <= *start || k >= *start + *len)) continue;
            merge_origins(out, v.origins);
        }
        return out;
    }

    /// Strong update of [start, start+len) to `fill`, folding partial overlaps into fill.
    void overwrite(std::uint64_t start, std::uint64_t len, AbstractValue fill, bool exact_word) {
        for (auto it = memory.begin(); it != memory.end();) {
            const bool overlaps = !(it->first + 32 <= start || it->first >= start + len);
            if (!overlaps) { ++it; continue; }
            const bool fully_covered = it->first >= start && it->first + 32 <= start + len;
            if (!fully_covered) merge_origins(fill.origins, it->second.origins);
            it = memory.erase(it);
        }
        if (exact_word) {
            memory[start] = std::move(fill);
        } else if (!fill.origins.empty()) {
            for (std::uint64_t w = start; w < start + len; w += 32) {
                auto v = AbstractValue::top(fill.origins);
                memory[w] = v;
            }
        }
    }
};

using ContextKey = std::vector<std::uint32_t>;

struct Context {
    ContextKey key;
    State state;
};

std::optional<Word> fold(Op op, const std::vector<AbstractValue>& a) {
    for (const auto& v : a)
        if (!v.is_const()) return std::nullopt;
    const auto x = [&](std::size_t i) -> const Word& { return a[i].konst; };
    switch (op) {
        case Op::ADD: return x(0) + x(1);
        case Op::MUL: return x(0) * x(1);
        case Op::SUB: return x(0) - x(1);
        case Op::DIV: return x(1) == 0 ? Word(0) : Word(x(0) / x(1));
        case Op::MOD: return x(1) == 0 ? Word(0) : Word(x(0) % x(1));
        case Op::EXP:
            if (x(1) > 255) return std::nullopt;
            return Word(boost::multiprecision::pow(x(0), static_cast<unsigned>(x(1))));
        case Op::LT: return Word(x(0) < x(1) ? 1 : 0);
        case Op::GT: return Word(x(0) > x(1) ? 1 : 0);
        case Op::EQ: return Word(x(0) == x(1) ? 1 : 0);
        case Op::ISZERO: return Word(x(0) == 0 ? 1 : 0);
        case Op::AND: return x(0) & x(1);
        case Op::OR: return x(0) | x(1);
        case Op::XOR: return x(0) ^ x(1);
        case Op::NOT: return Word(~x(0));
        case Op::SHL: return x(0) >= 256 ? Word(0) : Word(x(1) << static_cast<unsigned>(x(0)));
        case Op::SHR: return x(0) >= 256 ? Word(0) : Word(x(1) >> static_cast<unsigned>(x(0)));
        default: return std::nullopt;
    }
}

class Explorer {
public:
    Explorer(const InstructionStream& stream, const std::vector<BasicBlock>& blocks, const FlowOptions& opts)
        : stream_(stream), blocks_(blocks), opts_(opts), contexts_(blocks.size()),
          edges_(blocks.size()) {
        result_.facts.resize(stream.code().size());
        result_.reachable.assign(blocks.size(), false);
        for (const auto& b : blocks) block_start_.emplace(b.start, b.id);
    }

    Exploration run() {
        if (blocks_.empty()) return std::move(result_);
        enqueue(0, State{});
        std::size_t transfers = 0;
        while (!work_.empty()) {
            if (++transfers > opts_.max_transfers) {
                result_.truncated = true;
                break;
            }
            const auto [block, ctx] = work_.front();
            work_.pop_front();
            queued_.erase({block, ctx});
            State st = contexts_[block][ctx].state;
            process(block, std::move(st));
        }
        result_.successors.resize(blocks_.size());
        for (std::size_t b = 0; b < blocks_.size(); ++b)
            result_.successors[b].assign(edges_[b].begin(), edges_[b].end());
        std::sort(result_.call_sites.begin(), result_.call_sites.end(),
                  [](const CallSite& a, const CallSite& b) { return a.site < b.site; });
        result_.call_sites.erase(std::unique(result_.call_sites.begin(), result_.call_sites.end(),
                                             [](const CallSite& a, const CallSite& b) {
                                                 return a.site == b.site && a.callee_block == b.callee_block &&
                                                        a.return_block == b.return_block;
                                             }),
                                 result_.call_sites.end());
        return std::move(result_);
    }

private:
    const InstructionStream& stream_;
    const std::vector<BasicBlock>& blocks_;
    const FlowOptions& opts_;
    std::vector<std::vector<Context>> contexts_;
    std::vector<std::set<Edge>> edges_;
    std::map<std::size_t, std::uint32_t> block_start_;
    std::deque<std::pair<std::uint32_t, std::size_t>> work_;
    std::set<std::pair<std::uint32_t, std::size_t>> queued_;
    Exploration result_;

    std::uint32_t jumpdest_block(const AbstractValue& v) const {
        if (!v.is_const()) return kUnknownBlock;
        const auto off = as_offset(v.konst);
        if (!off || !stream_.is_jumpdest(*off)) return kUnknownBlock;
        auto it = block_start_.find(*off);
        return it == block_start_.end() ? kUnknownBlock : it->second;
    }

    ContextKey key_of(const State& st) const {
        ContextKey key;
        key.reserve(st.stack.size());
        for (const auto& v : st.stack) {
            const auto b = jumpdest_block(v);
            key.push_back(b == kUnknownBlock ? 0u : b + 1);
        }
        return key;
    }

    void enqueue(std::uint32_t block, State st) {
        result_.reachable[block] = true;
        auto& ctxs = contexts_[block];
        ContextKey key = key_of(st);
        std::size_t idx = ctxs.size();
        for (std::size_t i = 0; i < ctxs.size(); ++i)
            if (ctxs[i].key == key) { idx = i; break; }
        if (idx == ctxs.size() && ctxs.size() >= opts_.max_contexts_per_block) {
            // Widen: everything beyond the cap shares one context.
            key = ContextKey{0xffffffffu};
            for (std::size_t i = 0; i < ctxs.size(); ++i)
                if (ctxs[i].key == key) { idx = i; break; }
        }
        bool changed;
        if (idx == ctxs.size()) {
            ctxs.push_back(Context{key, std::move(st)});
            changed = true;
        } else {
            changed = ctxs[idx].state.join(st);
        }
        if (changed && queued_.insert({block, idx}).second) work_.emplace_back(block, idx);
    }

    void record(std::size_t index, std::vector<AbstractValue> operands) {
        auto& f = result_.facts[index];
        if (!f.reached) {
            f.reached = true;
            f.operands = std::move(operands);
            return;
        }
        for (std::size_t i = 0; i < f.operands.size() && i < operands.size(); ++i) f.operands[i].join(operands[i]);
    }

    void add_edge(std::uint32_t from, std::uint32_t to, EdgeKind kind) { edges_[from].insert(Edge{to, kind}); }

    void process(std::uint32_t bid, State st) {
        const auto& blk = blocks_[bid];
        const auto& code = stream_.code();
        std::vector<AbstractValue> last_ops;
        for (std::size_t i = blk.first; i < blk.last; ++i) step(code[i], i, st, last_ops);

        const Instruction& tail = code[blk.last - 1];
        const bool has_next = blk.last < code.size();
        const auto next_block = has_next ? static_cast<std::uint32_t>(bid + 1) : kUnknownBlock;

        if (tail.op() == Op::JUMP) {
            const AbstractValue& target = last_ops.at(0);
            const auto tb = jumpdest_block(target);
            if (tb == kUnknownBlock) {
                add_edge(bid, kUnknownBlock, EdgeKind::Unknown);
                return;
            }
            const bool direct = blk.last - 1 > blk.first && is_push(code[blk.last - 2].opcode) &&
                                code[blk.last - 2].immediate == target.konst;
            if (!direct) {
                add_edge(bid, tb, EdgeKind::Return);
                enqueue(tb, std::move(st));
                return;
            }
            if (auto ret = find_return_address(blk, st, target.konst)) {
                const auto rb = jumpdest_block(AbstractValue::constant(ret->first));
                add_edge(bid, tb, EdgeKind::Call);
                add_edge(bid, rb, EdgeKind::CallReturn);
                result_.call_sites.push_back(CallSite{tail.offset, bid, tb, rb, ret->second});
            } else {
                add_edge(bid, tb, EdgeKind::Jump);
            }
            enqueue(tb, std::move(st));
            return;
        }
        if (tail.op() == Op::JUMPI) {
            const AbstractValue& target = last_ops.at(0);
            const AbstractValue& cond = last_ops.at(1);
            const auto tb = jumpdest_block(target);
            if (tb == kUnknownBlock) {
                add_edge(bid, kUnknownBlock, EdgeKind::Unknown);
            } else {
                if (cond.tag == ValueTag::SelectorEq)
                    result_.public_entries.emplace(static_cast<std::uint32_t>(cond.tag_value), tb);
                add_edge(bid, tb, EdgeKind::BranchTaken);
                enqueue(tb, st);
            }
            if (next_block != kUnknownBlock) {
                add_edge(bid, next_block, EdgeKind::Fallthrough);
                enqueue(next_block, std::move(st));
            }
            return;
        }
        if (tail.halts()) return;
        if (next_block != kUnknownBlock) {
            add_edge(bid, next_block, EdgeKind::Fallthrough);
            enqueue(next_block, std::move(st));
        }
    }

    /// The compiler's internal-call idiom: the block pushed a jump destination
    /// that is still on the stack when it jumps elsewhere.
    std::optional<std::pair<Word, std::size_t>> find_return_address(const BasicBlock& blk, State& st,
                                                                     const Word& target) const {
        std::set<Word> pushed;
        const auto& code = stream_.code();
        for (std::size_t i = blk.first; i + 1 < blk.last; ++i)
            if (is_push(code[i].opcode) && code[i].immediate != target) pushed.insert(code[i].immediate);
        if (pushed.empty()) return std::nullopt;
        std::optional<std::pair<Word, std::size_t>> found;
        const std::size_t depth = std::min<std::size_t>(16, st.stack.size());
        for (std::size_t d = 0; d < depth; ++d) {
            const auto& v = st.stack[st.stack.size() - 1 - d];
            if (v.is_const() && pushed.count(v.konst) && jumpdest_block(v) != kUnknownBlock)
                found = std::make_pair(v.konst, d);
        }
        return found;
    }

    void step(const Instruction& ins, std::size_t index, State& st, std::vector<AbstractValue>& last_ops) {
        const bool blocked = opts_.blocked_sites.count(ins.offset) > 0;
        auto emit = [&](AbstractValue v) {
            if (blocked) v.origins.clear();
            st.push(std::move(v));
        };
        const std::uint8_t b = ins.opcode;
        const Op op = ins.op();

        if (is_push(b)) { emit(AbstractValue::constant(ins.immediate)); return; }
        if (op == Op::PUSH0) { emit(AbstractValue::constant(0)); return; }
        if (is_dup(b)) {
            const std::size_t n = b - 0x7f;
            AbstractValue v = st.peek(n - 1);
            emit(std::move(v));
            return;
        }
        if (is_swap(b)) {
            const std::size_t n = b - 0x8f;
            st.materialize(n + 1);
            auto& s = st.stack;
            std::swap(s[s.size() - 1], s[s.size() - 1 - n]);
            if (blocked) {
                s[s.size() - 1].origins.clear();
                s[s.size() - 1 - n].origins.clear();
            }
            return;
        }
        if (op == Op::JUMP) {
            std::vector<AbstractValue> snap;
            for (std::size_t d = 0; d < 17; ++d) snap.push_back(st.peek(d));
            record(index, std::move(snap));
            last_ops.assign(1, st.pop());
            return;
        }

        const auto& info = op_info(b);
        std::vector<AbstractValue> ops;
        ops.reserve(info.pops);
        for (unsigned i = 0; i < info.pops; ++i) ops.push_back(st.pop());
        if (info.pops > 0) record(index, ops);

        const auto here = Origins{static_cast<std::uint32_t>(ins.offset)};
        auto all_origins = [&] {
            Origins o;
            for (const auto& v : ops) merge_origins(o, v.origins);
            return o;
        };
        auto const_offset = [](const AbstractValue& v) -> std::optional<std::uint64_t> {
            return v.is_const() ? as_offset(v.konst, 1ull << 24) : std::nullopt;
        };

        switch (op) {
            case Op::JUMPI:
                last_ops = std::move(ops);
                return;
            case Op::CALLER: case Op::CALLVALUE: case Op::CALLDATASIZE:
                emit(AbstractValue::top(here));
                return;
            case Op::CALLDATALOAD: {
                auto v = AbstractValue::top(union_of({&here, &ops[0].origins}));
                if (ops[0].is_const() && ops[0].konst == 0) v.tag = ValueTag::CalldataWord0;
                emit(std::move(v));
                return;
            }
            case Op::CALLDATACOPY: {
                const auto dest = const_offset(ops[0]);
                const auto len = const_offset(ops[2]);
                auto fill = AbstractValue::top(blocked ? Origins{} : union_of({&here, &ops[1].origins, &ops[2].origins}));
                if (dest && len) st.overwrite(*dest, *len, fill, false);
                else merge_origins(st.mem_unknown, fill.origins);
                return;
            }
            case Op::CODECOPY: case Op::RETURNDATACOPY: case Op::EXTCODECOPY: {
                const std::size_t d = op == Op::EXTCODECOPY ? 1 : 0;
                const auto dest = const_offset(ops[d]);
                const auto len = const_offset(ops[d + 2]);
                if (dest && len) st.overwrite(*dest, *len, AbstractValue::top(), false);
                return;
            }
            case Op::MCOPY: {
                Origins o = st.memory_origins(std::nullopt, std::nullopt);
                if (!blocked) merge_origins(st.mem_unknown, o);
                return;
            }
            case Op::MLOAD: {
                const auto off = const_offset(ops[0]);
                if (off) {
                    auto it = st.memory.find(*off);
                    if (it != st.memory.end()) {
                        auto v = it->second;
                        merge_origins(v.origins, st.mem_unknown);
                        merge_origins(v.origins, ops[0].origins);
                        emit(std::move(v));
                        return;
                    }
                }
                Origins o = st.memory_origins(off, off ? std::optional<std::uint64_t>(32) : std::nullopt);
                merge_origins(o, ops[0].origins);
                emit(AbstractValue::top(std::move(o)));
                return;
            }
            case Op::MSTORE: {
                const auto off = const_offset(ops[0]);
                auto v = ops[1];
                if (blocked) v.origins.clear();
                if (off) st.overwrite(*off, 32, std::move(v), true);
                else merge_origins(st.mem_unknown, v.origins);
                return;
            }
            case Op::MSTORE8: {
                if (!blocked) merge_origins(st.mem_unknown, ops[1].origins);
                return;
            }
            case Op::SHA3: {
                const auto off = const_offset(ops[0]);
                const auto len = const_offset(ops[1]);
                Origins o = st.memory_origins(off && len ? off : std::nullopt, off && len ? len : std::nullopt);
                merge_origins(o, ops[0].origins);
                merge_origins(o, ops[1].origins);
                auto v = AbstractValue::top(std::move(o));
                if (off && len && *len == 64) {
                    auto it = st.memory.find(*off + 32);
                    if (it != st.memory.end() && it->second.is_const()) {
                        v.tag = ValueTag::SlotHash;
                        v.tag_value = it->second.konst;
                    }
                }
                emit(std::move(v));
                return;
            }
            case Op::SLOAD:
                emit(AbstractValue::top(union_of({&here, &ops[0].origins})));
                return;
            case Op::CALL: case Op::DELEGATECALL: case Op::STATICCALL: case Op::CALLCODE: {
                const std::size_t ro = (op == Op::CALL || op == Op::CALLCODE) ? 5 : 4;
                const auto ret_off = const_offset(ops[ro]);
                const auto ret_len = const_offset(ops[ro + 1]);
                if (ret_off && ret_len) st.overwrite(*ret_off, *ret_len, AbstractValue::top(), false);
                emit(AbstractValue::top(op == Op::CALLCODE ? here : Origins{}));
                return;
            }
            case Op::CREATE: case Op::CREATE2:
                emit(AbstractValue::top());
                return;
            case Op::PC:
                emit(AbstractValue::constant(ins.offset));
                return;
            default:
                break;
        }

        if (info.pushes == 0) return;

        AbstractValue out = AbstractValue::top(all_origins());
        if (auto folded = fold(op, ops)) {
            out.shape = AbstractValue::Shape::Const;
            out.konst = *folded;
        }
        // Selector extraction and comparison idioms.
        if (op == Op::SHR && ops[0].is_const() && ops[0].konst == 224 && ops[1].tag == ValueTag::CalldataWord0)
            out.tag = ValueTag::Selector;
        else if (op == Op::DIV && ops[1].is_const() && ops[1].konst == (Word(1) << 224) &&
                 ops[0].tag == ValueTag::CalldataWord0)
            out.tag = ValueTag::Selector;
        else if (op == Op::AND) {
            for (int k = 0; k < 2; ++k)
                if (ops[k].is_const() && ops[k].konst == 0xffffffffu && ops[1 - k].tag == ValueTag::Selector)
                    out.tag = ValueTag::Selector;
        } else if (op == Op::EQ) {
            for (int k = 0; k < 2; ++k)
                if (ops[k].is_const() && ops[k].konst <= 0xffffffffu && ops[1 - k].tag == ValueTag::Selector) {
                    out.tag = ValueTag::SelectorEq;
                    out.tag_value = ops[k].konst;
                }
        }
        emit(std::move(out));
    }
};

}  // namespace

Exploration explore(const InstructionStream& stream, const std::vector<BasicBlock>& blocks,
                    const FlowOptions& options) {
    return Explorer(stream, blocks, options).run();
}

// ---------------------------------------------------------------------------

ControlFlowGraph::ControlFlowGraph(std::shared_ptr<const InstructionStream> stream, std::vector<BasicBlock> blocks,
                                   Exploration ex)
    : stream_(std::move(stream)), blocks_(std::move(blocks)), facts_(std::move(ex.facts)),
      call_sites_(std::move(ex.call_sites)), public_entries_(std::move(ex.public_entries)),
      truncated_(ex.truncated) {
    block_index_.assign(stream_->code().size(), kUnknownBlock);
    for (auto& b : blocks_) {
        b.successors = ex.successors.empty() ? std::vector<Edge>{} : ex.successors[b.id];
        b.reachable = !ex.reachable.empty() && ex.reachable[b.id];
        for (std::size_t i = b.first; i < b.last; ++i) block_index_[i] = b.id;
    }
}

const SiteFact& ControlFlowGraph::fact_at(std::size_t offset) const {
    static const SiteFact none;
    const auto i = stream_->index_at(offset);
    return i == InstructionStream::npos ? none : facts_[i];
}

std::uint32_t ControlFlowGraph::block_of(std::size_t offset) const noexcept {
    const auto i = stream_->owning_index(offset);
    return i == InstructionStream::npos ? kUnknownBlock : block_index_[i];
}

std::uint32_t ControlFlowGraph::block_at(std::size_t offset) const noexcept {
    const auto b = block_of(offset);
    return (b != kUnknownBlock && blocks_[b].start == offset) ? b : kUnknownBlock;
}

std::vector<std::uint32_t> ControlFlowGraph::predecessors(std::uint32_t block) const {
    std::vector<std::uint32_t> out;
    for (const auto& b : blocks_)
        for (const auto& e : b.successors)
            if (e.target == block) {
                out.push_back(b.id);
                break;
            }
    return out;
}

std::string ControlFlowGraph::dump() const {
    std::ostringstream os;
    for (const auto& b : blocks_)
        for (const auto& e : b.successors) {
            os << "block" << b.id << " -> ";
            if (e.target == kUnknownBlock) os << "UNKNOWN";
            else os << "block" << e.target;
            os << ' ' << to_string(e.kind) << '\n';
        }
    return os.str();
}

ControlFlowGraph build_cfg(std::shared_ptr<const InstructionStream> stream) {
    auto blocks = split_blocks(*stream);
    auto ex = explore(*stream, blocks);
    return ControlFlowGraph(std::move(stream), std::move(blocks), std::move(ex));
}

ControlFlowGraph build_cfg(const InstructionStream& stream) {
    return build_cfg(std::make_shared<const InstructionStream>(stream));
}

// ---------------------------------------------------------------------------

std::string SlotDescriptor::to_string() const {
    switch (kind) {
        case Kind::Constant: return "slot " + smvscan::to_hex(value);
        case Kind::Hashed: return "hash(" + smvscan::to_hex(value) + ")";
        case Kind::Opaque: return "opaque";
        case Kind::EthBalance: return "ETH balance";
        case Kind::CallTarget: return "call target";
    }
    return "?";
}

SlotDescriptor slot_of(const AbstractValue& v) {
    if (v.is_const()) return SlotDescriptor::constant(v.konst);
    if (v.tag == ValueTag::SlotHash) return SlotDescriptor::hashed(v.tag_value);
    return SlotDescriptor::opaque();
}

std::vector<StorageAccess> storage_accesses(const ControlFlowGraph& cfg) {
    std::vector<StorageAccess> out;
    for (const auto& ins : cfg.stream().code()) {
        if (ins.op() != Op::SLOAD && ins.op() != Op::SSTORE) continue;
        const auto& f = cfg.fact_at(ins.offset);
        if (!f.reached || f.operands.empty()) continue;
        out.push_back({slot_of(f.operands[0]),
                       ins.op() == Op::SLOAD ? StorageAccess::Kind::Read : StorageAccess::Kind::Write, ins.offset});
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<CallGraphEdge> call_graph(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions) {
    std::vector<CallGraphEdge> out;
    std::vector<bool> called(regions.size(), false);
    for (const auto& cs : cfg.call_sites()) {
        const auto* caller = innermost_region(regions, cs.site);
        const auto* callee = region_starting_at(regions, cfg.blocks()[cs.callee_block].start);
        if (caller == nullptr || callee == nullptr) continue;
        out.push_back({caller->id, callee->id, CallGraphEdge::Kind::InternalJump, cs.site});
        called[callee->id] = true;
    }
    // Code nested in a region but never called explicitly executes inline.
    for (const auto& r : regions) {
        if (called[r.id]) continue;
        const MethodRegion* parent = nullptr;
        for (const auto& p : regions)
            if (p.contains(r) && (parent == nullptr || (p.end - p.start) < (parent->end - parent->start))) parent = &p;
        if (parent != nullptr) out.push_back({parent->id, r.id, CallGraphEdge::Kind::InternalJump, r.start});
    }
    for (const auto& ins : cfg.stream().code()) {
        if (!is_external_call(ins.opcode)) continue;
        const auto& f = cfg.fact_at(ins.offset);
        if (!f.reached) continue;
        const auto* caller = innermost_region(regions, ins.offset);
        if (caller == nullptr) continue;
        ExternalCallee ext{ins.offset, ins.opcode, std::nullopt};
        if (f.operands.size() > 1 && f.operands[1].is_const()) ext.target = f.operands[1].konst;
        auto kind = ins.op() == Op::DELEGATECALL ? CallGraphEdge::Kind::DelegateCall
                  : ins.op() == Op::STATICCALL ? CallGraphEdge::Kind::StaticCall
                                               : CallGraphEdge::Kind::ExternalCall;
        out.push_back({caller->id, ext, kind, ins.offset});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const CallGraphEdge& a, const CallGraphEdge& b) { return a.site < b.site; });
    return out;
}

std::vector<std::vector<std::uint32_t>> internal_callees(const ControlFlowGraph& cfg,
                                                         const std::vector<MethodRegion>& regions) {
    std::vector<std::vector<std::uint32_t>> adj(regions.size());
    for (const auto& e : call_graph(cfg, regions))
        if (e.internal()) adj[e.caller].push_back(e.callee_region());
    for (auto& v : adj) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }
    return adj;
}

namespace {

void enumerate_chains(const std::vector<std::vector<std::uint32_t>>& adj, Chain& path, std::size_t max_depth,
                      std::vector<Chain>& out) {
    out.push_back(path);
    if (path.size() >= max_depth) return;
    for (auto callee : adj[path.back()]) {
        if (std::find(path.begin(), path.end(), callee) != path.end()) continue;
        path.push_back(callee);
        enumerate_chains(adj, path, max_depth, out);
        path.pop_back();
    }
}

}  // namespace

std::vector<Chain> call_chains(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions,
                               std::uint32_t root, std::size_t max_depth) {
    if (max_depth == 0) throw std::invalid_argument("max_depth must be at least 1");
    const auto adj = internal_callees(cfg, regions);
    std::vector<Chain> out;
    Chain path{root};
    enumerate_chains(adj, path, max_depth, out);
    return out;
}

std::vector<std::vector<Chain>> all_call_chains(const ControlFlowGraph& cfg, const std::vector<MethodRegion>& regions,
                                                std::size_t max_depth) {
    if (max_depth == 0) throw std::invalid_argument("max_depth must be at least 1");
    const auto adj = internal_callees(cfg, regions);
    std::vector<std::vector<Chain>> out(regions.size());
    for (const auto& r : regions) {
        Chain path{r.id};
        enumerate_chains(adj, path, max_depth, out[r.id]);
    }
    return out;
}

}  // namespace smvscan
