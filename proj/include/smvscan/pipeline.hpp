#pragma once

// End-to-end analysis of one contract and its report rendering.

#include "smvscan/boundary.hpp"
#include "smvscan/database.hpp"
#include "smvscan/detector.hpp"
#include "smvscan/flow.hpp"
#include "smvscan/matcher.hpp"
#include "smvscan/model.hpp"
#include "smvscan/signature.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace smvscan {

/// Human names for selectors and storage slots. Lines:
///   selector 0x23732619 _swap
///   selector _swap(address,uint256) _swap
///   slot hash(0x2) balances
///   slot 0x3 owner
struct NameTable {
    std::map<std::uint32_t, std::string> selectors;
    std::vector<std::pair<SlotDescriptor, std::string>> slots;

    static NameTable parse(std::string_view text);
    static NameTable load(const std::filesystem::path& path);
    std::optional<std::string> slot_name(const SlotDescriptor& s) const;
};

struct AnalysisOptions {
    MatchOptions match;
    BoundaryMode boundary = BoundaryMode::Heuristic;
    std::shared_ptr<const ModelWeights> model;
    ModelOptions model_options;
    std::size_t max_depth = 5;
    FlowOptions flow;
};

struct StageTimes {
    double decode_ms = 0, flow_ms = 0, boundary_ms = 0, signature_ms = 0, match_ms = 0, detect_ms = 0;
};

struct Analysis {
    ControlFlowGraph cfg;
    std::vector<MethodRegion> regions;
    std::vector<std::vector<Chain>> chains;
    std::vector<MethodSignature> signatures;
    std::vector<ReuseMatch> matches;
    Detection detection;
    StageTimes times;
};

Analysis analyze(const Bytes& code, const Database& db, const KnowledgeBase& kb, const AnalysisOptions& options);

/// Analyzes again on the same regions with a different data-flow configuration.
Analysis reanalyze_flow(const Analysis& base, const Database& db, const KnowledgeBase& kb,
                        const AnalysisOptions& options);

DetectorContext detector_context(const Analysis& a, const Database& db, const KnowledgeBase& kb,
                                 const MatchOptions& thresholds);

class Namer {
public:
    Namer(const Analysis& a, const Database& db, const NameTable* names) : a_(a), db_(db), names_(names) {}

    /// Names-file selector name, else matched DB method, else selector hex, else region#id.
    std::string region(std::uint32_t id) const;
    std::string slot(const SlotDescriptor& s) const;

private:
    const Analysis& a_;
    const Database& db_;
    const NameTable* names_;
};

/// `_swap → CallWithValue → {ETH balance}`; conflicts append the counterpart chain after ` | `.
std::string format_trace(const VulnerabilityTrace& t, const Namer& n);

struct ContractReport {
    std::string input;
    Analysis analysis;
    const NameTable* names = nullptr;
};

nlohmann::ordered_json report_json(const std::vector<ContractReport>& reports, const Database& db,
                                   const KnowledgeBase& kb, bool timing);
std::string report_text(const std::vector<ContractReport>& reports, const Database& db, const KnowledgeBase& kb,
                        bool timing);

}  // namespace smvscan
