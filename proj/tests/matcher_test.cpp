#include "doctest.h"

#include "fixture_util.hpp"
#include "smvscan/error.hpp"
#include "smvscan/matcher.hpp"

#include <cmath>
#include <random>

using namespace smvscan;

namespace {

SymbolSeq S(std::string_view text) { return parse_symbols(text); }

MethodSignature sig(std::uint32_t region, std::string_view intra, std::string_view chain = "") {
    MethodSignature s;
    s.region_id = region;
    s.intra = S(intra);
    s.chain = chain.empty() ? s.intra : S(chain);
    return s;
}

SymbolSeq random_seq(std::mt19937& rng, std::size_t max_len) {
    SymbolSeq out(rng() % (max_len + 1));
    for (auto& s : out) s = static_cast<Symbol>(rng() % kSymbolCount);
    return out;
}

}  // namespace

TEST_CASE("opcode type similarity") {
    CHECK(opcode_type_similarity(S("R W I"), S("I W R R")) == doctest::Approx(1.0));
    CHECK(opcode_type_similarity(S("R W"), S("I M1")) == 0.0);
    CHECK(opcode_type_similarity(S("R W I"), S("R W Re")) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(opcode_type_similarity({}, S("R")) == 0.0);
    CHECK(opcode_type_similarity({}, {}) == 0.0);
    const auto v = one_hot(S("R R W"));
    CHECK(std::accumulate(v.begin(), v.end(), 0) == 2);
}

TEST_CASE("opcode length similarity") {
    const SymbolSeq s30(30, Symbol::R), s40(40, Symbol::R);
    CHECK(opcode_length_similarity(s40, s40) == 1.0);
    CHECK(opcode_length_similarity(s40, s30) == doctest::Approx(0.75));
    CHECK(opcode_length_similarity(s30, s40) == doctest::Approx(0.75));
    CHECK(opcode_length_similarity(s30, s40, true) == doctest::Approx(40.0 / 30.0));
    CHECK(opcode_length_similarity(s40, s30, true) == doctest::Approx(0.75));
    CHECK(opcode_length_similarity(s30, {}) == 0.0);
    CHECK_THROWS_AS(opcode_length_similarity({}, s30), EmptyContractSignature);
}

TEST_CASE("scores are symmetric, bounded and agree with an explicit cosine") {
    std::mt19937 rng(2024);
    for (int round = 0; round < 1000; ++round) {
        const auto a = random_seq(rng, 6);
        const auto b = random_seq(rng, 6);
        double va[kSymbolCount] = {}, vb[kSymbolCount] = {};
        for (auto s : a) va[static_cast<std::size_t>(s)] = 1;
        for (auto s : b) vb[static_cast<std::size_t>(s)] = 1;
        double dot = 0, na = 0, nb = 0;
        for (std::size_t i = 0; i < kSymbolCount; ++i) {
            dot += va[i] * vb[i];
            na += va[i] * va[i];
            nb += vb[i] * vb[i];
        }
        const double want = na == 0 || nb == 0 ? 0.0 : dot / (std::sqrt(na) * std::sqrt(nb));
        const double pt = opcode_type_similarity(a, b);
        CHECK(std::abs(pt - want) <= 1e-9);
        CHECK(pt == opcode_type_similarity(b, a));
        CHECK(pt >= 0.0);
        CHECK(pt <= 1.0 + 1e-12);
        if (!a.empty() && !b.empty()) {
            const double pn = opcode_length_similarity(a, b);
            CHECK(pn == opcode_length_similarity(b, a));
            CHECK(pn > 0.0);
            CHECK(pn <= 1.0);
        }
    }
}

TEST_CASE("threshold validation") {
    CHECK_NOTHROW(validate(MatchOptions{}));
    CHECK_NOTHROW(validate(MatchOptions{1.0, 1.0, false}));
    CHECK_THROWS_AS(validate(MatchOptions{0.0, 0.5, false}), std::invalid_argument);
    CHECK_THROWS_AS(validate(MatchOptions{0.5, 1.5, false}), std::invalid_argument);
}

TEST_CASE("comparison prefers chains") {
    const auto a = sig(0, "R", "R W");
    const auto b = sig(0, "W", "R W");
    CHECK(comparable(a, b).first == &a.chain);
    auto c = b;
    c.chain.clear();
    CHECK(comparable(a, c).first == &a.intra);
    CHECK(comparable(a, c).second == &c.intra);
}

TEST_CASE("match keeps all passers and flags one best per region") {
    const auto db = parse_db(
        "Lib\t1.0\tf\t-\tR W I M1\tR W I M1\tinternal\n"
        "Lib\t2.0\tf\t-\tR W I M1\tR W I M1\tinternal\n"
        "Lib\t3.0\tf\t-\tR W I M1 M1\tR W I M1 M1\tinternal\n"
        "Other\t1.0\tg\t-\tC0 P1\tC0 P1\tinternal\n");
    const std::vector<MethodSignature> contract = {sig(0, "R W I M1"), sig(1, "C1"), sig(2, "")};
    const auto ms = match(contract, db);
    REQUIRE(ms.size() == 3);
    for (const auto& m : ms) {
        CHECK(m.region == 0);
        CHECK(m.p_t >= kDefaultTheta1);
        CHECK(m.p_n >= kDefaultTheta2);
    }
    // equal scores: the lexicographically smaller key wins
    CHECK(ms[0].best);
    CHECK_FALSE(ms[1].best);
    CHECK_FALSE(ms[2].best);
    CHECK(ms[2].p_n == doctest::Approx(0.8));
    CHECK(best_match(ms, 0) == &ms[0]);
    CHECK(best_match(ms, 1) == nullptr);

    // p_n breaks a p_t tie
    const auto db2 = parse_db(
        "A\t1\tf\t-\tR W I M1 M1\tR W I M1 M1\tinternal\n"
        "B\t1\tf\t-\tR W I M1\tR W I M1\tinternal\n");
    const auto ms2 = match(contract, db2);
    REQUIRE(ms2.size() == 2);
    CHECK(ms2[1].best);
}

TEST_CASE("self-match and strict thresholds") {
    const auto& db = testing::fixture_db();
    std::vector<MethodSignature> contract;
    for (std::uint32_t i = 0; i < db.records.size(); ++i) {
        auto s = db.signatures[i];
        s.region_id = i;
        contract.push_back(s);
    }
    const auto strict = match(contract, db, {1.0, 1.0, false});
    for (std::uint32_t i = 0; i < contract.size(); ++i) {
        const auto* b = best_match(strict, i);
        REQUIRE(b != nullptr);
        CHECK(b->record == i);
        CHECK(b->p_t == doctest::Approx(1.0));
        CHECK(b->p_n == 1.0);
    }

    // dropping one symbol class fails θ1 = 1 against the original
    for (std::uint32_t i = 0; i < contract.size(); ++i) {
        auto s = contract[i];
        const auto drop = s.chain.front();
        std::erase(s.chain, drop);
        std::erase(s.intra, drop);
        if (s.chain.empty() && s.intra.empty()) continue;
        const auto ms = match({s}, db, {1.0, 0.01, false});
        for (const auto& m : ms) CHECK(m.record != i);
    }
}

TEST_CASE("raising thresholds never enlarges the match set") {
    std::vector<std::vector<MethodSignature>> corpus;
    for (const auto& name : testing::contract_names()) corpus.push_back(testing::scan(name).analysis.signatures);
    const auto& db = testing::fixture_db();
    const double grid[] = {0.5, 0.65, 0.8, 0.9, 1.0};
    for (const auto& sigs : corpus) {
        for (std::size_t i = 0; i + 1 < std::size(grid); ++i) {
            for (double t2 : grid) {
                const auto lo = match(sigs, db, {grid[i], t2, false});
                const auto hi = match(sigs, db, {grid[i + 1], t2, false});
                const auto lo2 = match(sigs, db, {t2, grid[i], false});
                const auto hi2 = match(sigs, db, {t2, grid[i + 1], false});
                auto subset = [](const std::vector<ReuseMatch>& small, const std::vector<ReuseMatch>& big) {
                    return std::all_of(small.begin(), small.end(), [&](const ReuseMatch& m) {
                        return std::any_of(big.begin(), big.end(), [&](const ReuseMatch& n) {
                            return n.region == m.region && n.record == m.record;
                        });
                    });
                };
                CHECK(subset(hi, lo));
                CHECK(subset(hi2, lo2));
            }
        }
    }
}

TEST_CASE("both _xp records match the metapool_dapp regions") {
    const auto s = testing::scan("metapool_dapp");
    std::set<std::string> seen;
    for (const auto& m : s.analysis.matches)
        if (m.best) seen.insert(testing::fixture_db().records[m.record].key.subcontract);
    CHECK(seen.count("SwapUtils") == 1);
    CHECK(seen.count("MetaSwapUtils") == 1);
}
