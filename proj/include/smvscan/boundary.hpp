#pragma once

// Method-boundary recovery. The heuristic engine works from the control-flow
// graph; the learned engine (model.hpp) produces per-offset S/E/N labels that
// are paired into regions here.

#include "smvscan/bytecode.hpp"
#include "smvscan/flow.hpp"
#include "smvscan/region.hpp"

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace smvscan {

enum class Label : std::uint8_t { S = 0, E = 1, N = 2 };
std::string_view to_string(Label l) noexcept;

struct BoundaryLabel {
    std::size_t offset = 0;
    Label label = Label::N;
    float confidence = 1.0f;
    LabelSource source = LabelSource::Heuristic;
};

// Token ids: five reserved tokens, then one per byte value.
inline constexpr std::uint16_t kPad = 0;
inline constexpr std::uint16_t kTokS = 1;
inline constexpr std::uint16_t kTokE = 2;
inline constexpr std::uint16_t kTokN = 3;
inline constexpr std::uint16_t kMask = 4;
inline constexpr std::uint16_t kReservedTokens = 5;
inline constexpr std::size_t kVocabSize = 256 + kReservedTokens;

/// Tokens for the executable bytes [begin, end), right-padded to max_seq_len.
std::vector<std::uint16_t> tokenize(const InstructionStream& stream, std::size_t begin, std::size_t end,
                                    std::size_t max_seq_len = 512);

std::vector<MethodRegion> recover_heuristic(const ControlFlowGraph& cfg);

/// Heuristic regions as S/E labels (E placed at the first byte after the region).
std::vector<BoundaryLabel> regions_to_labels(const std::vector<MethodRegion>& regions);

/// Pairs S labels with the nearest following E. Unpaired S closes at the next
/// S or at `code_len`; unpaired E is dropped. N labels are ignored.
std::vector<MethodRegion> pair_labels(const std::vector<BoundaryLabel>& labels, std::size_t code_len);

enum class BoundaryMode { Heuristic, Model, Both };
std::string_view to_string(BoundaryMode m) noexcept;

/// Combines heuristic and model regions. Public heuristic regions always win;
/// in Model mode they are the only heuristic regions kept, in Both mode a
/// model region is added only where it overlaps no heuristic non-public region.
/// Model regions that partially overlap a kept region are dropped.
std::vector<MethodRegion> merge_regions(const std::vector<MethodRegion>& heuristic,
                                        const std::vector<MethodRegion>& model, BoundaryMode mode);

/// pair_labels merged with the heuristic public regions of `cfg`.
std::vector<MethodRegion> labels_to_regions(const std::vector<BoundaryLabel>& labels, const ControlFlowGraph& cfg);

/// True when every pair of regions is disjoint or nested.
bool laminar(const std::vector<MethodRegion>& regions);

}  // namespace smvscan
