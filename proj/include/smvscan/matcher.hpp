#pragma once

// Reuse identification by opcode-type and opcode-length similarity.

#include "smvscan/database.hpp"
#include "smvscan/signature.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace smvscan {

inline constexpr double kDefaultTheta1 = 0.82;
inline constexpr double kDefaultTheta2 = 0.75;

using OneHot = std::array<std::uint8_t, kSymbolCount>;
OneHot one_hot(const SymbolSeq& seq) noexcept;

/// Cosine of the one-hot presence vectors; 0 when either is all-zero.
double opcode_type_similarity(const SymbolSeq& fc, const SymbolSeq& fs) noexcept;

/// min/max of the lengths, or |fs|/|fc| when `verbatim`. Throws
/// EmptyContractSignature when fc is empty.
double opcode_length_similarity(const SymbolSeq& fc, const SymbolSeq& fs, bool verbatim = false);

struct MatchOptions {
    double theta1 = kDefaultTheta1;
    double theta2 = kDefaultTheta2;
    bool pn_verbatim = false;
};

/// Throws std::invalid_argument unless both thresholds lie in (0, 1].
void validate(const MatchOptions& o);

/// The pair of sequences compared: chains when both are non-empty, else intra.
std::pair<const SymbolSeq*, const SymbolSeq*> comparable(const MethodSignature& c, const MethodSignature& s) noexcept;

struct ReuseMatch {
    std::uint32_t region = 0;
    std::size_t record = 0;  // index into Database::records
    double p_t = 0;
    double p_n = 0;
    bool best = false;
};

/// Every (region, record) pair passing both thresholds, ordered by region then
/// record index. Regions with empty signatures are skipped.
std::vector<ReuseMatch> match(const std::vector<MethodSignature>& contract, const Database& db,
                              const MatchOptions& options = {});

/// The best-flagged match of each region, if any.
const ReuseMatch* best_match(const std::vector<ReuseMatch>& matches, std::uint32_t region) noexcept;

}  // namespace smvscan
