#include "smvscan/matcher.hpp"

#include "smvscan/error.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace smvscan {

OneHot one_hot(const SymbolSeq& seq) noexcept {
    OneHot v{};
    for (auto s : seq) v[static_cast<std::size_t>(s)] = 1;
    return v;
}

double opcode_type_similarity(const SymbolSeq& fc, const SymbolSeq& fs) noexcept {
    const auto a = one_hot(fc), b = one_hot(fs);
    unsigned dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < kSymbolCount; ++i) {
        dot += a[i] & b[i];
        na += a[i];
        nb += b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return dot / std::sqrt(static_cast<double>(na) * static_cast<double>(nb));
}

double opcode_length_similarity(const SymbolSeq& fc, const SymbolSeq& fs, bool verbatim) {
    if (fc.empty()) throw EmptyContractSignature();
    const double c = static_cast<double>(fc.size()), s = static_cast<double>(fs.size());
    if (verbatim) return s / c;
    return std::min(c, s) / std::max(c, s);
}

void validate(const MatchOptions& o) {
    auto ok = [](double t) { return t > 0.0 && t <= 1.0; };
    if (!ok(o.theta1)) throw std::invalid_argument("theta1 must lie in (0, 1]");
    if (!ok(o.theta2)) throw std::invalid_argument("theta2 must lie in (0, 1]");
}

std::pair<const SymbolSeq*, const SymbolSeq*> comparable(const MethodSignature& c, const MethodSignature& s) noexcept {
    if (!c.chain.empty() && !s.chain.empty()) return {&c.chain, &s.chain};
    return {&c.intra, &s.intra};
}

std::vector<ReuseMatch> match(const std::vector<MethodSignature>& contract, const Database& db,
                              const MatchOptions& options) {
    validate(options);
    std::vector<ReuseMatch> out;
    for (const auto& c : contract) {
        const std::size_t first = out.size();
        for (std::size_t k = 0; k < db.records.size(); ++k) {
            const auto [fc, fs] = comparable(c, db.signatures[k]);
            if (fc->empty()) continue;
            const double pt = opcode_type_similarity(*fc, *fs);
            if (pt < options.theta1) continue;
            const double pn = opcode_length_similarity(*fc, *fs, options.pn_verbatim);
            if (pn < options.theta2) continue;
            out.push_back({c.region_id, k, pt, pn, false});
        }
        if (out.size() == first) continue;
        auto best = std::max_element(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                                     [&](const ReuseMatch& a, const ReuseMatch& b) {
                                         if (a.p_t != b.p_t) return a.p_t < b.p_t;
                                         if (a.p_n != b.p_n) return a.p_n < b.p_n;
                                         // Smaller key wins, so it must compare as "larger".
                                         return db.records[b.record].key < db.records[a.record].key;
                                     });
        best->best = true;
    }
    return out;
}

const ReuseMatch* best_match(const std::vector<ReuseMatch>& matches, std::uint32_t region) noexcept {
    for (const auto& m : matches)
        if (m.region == region && m.best) return &m;
    return nullptr;
}

}  // namespace smvscan
