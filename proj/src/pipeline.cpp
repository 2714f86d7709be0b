#include "smvscan/pipeline.hpp"

#include "smvscan/error.hpp"
#include "smvscan/keccak.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace smvscan {

NameTable NameTable::parse(std::string_view text) {
    NameTable t;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string kind, key, name;
        if (!(ls >> kind) || kind[0] == '#') continue;
        if (!(ls >> key >> name)) throw ParseError(lineno, "expected `selector|slot KEY NAME`");
        if (kind == "selector") {
            if (key.find('(') != std::string::npos) {
                t.selectors[selector_of(key)] = name;
                continue;
            }
            try {
                std::size_t used = 0;
                const auto v = std::stoul(key, &used, 16);
                if (used != key.size() || v > 0xffffffffu) throw std::invalid_argument(key);
                t.selectors[static_cast<std::uint32_t>(v)] = name;
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad selector '" + key + "'");
            }
        } else if (kind == "slot") {
            const bool hashed = key.rfind("hash(", 0) == 0 && key.back() == ')';
            const auto num = hashed ? key.substr(5, key.size() - 6) : key;
            try {
                const Word w(num);
                t.slots.emplace_back(hashed ? SlotDescriptor::hashed(w) : SlotDescriptor::constant(w), name);
            } catch (const std::exception&) {
                throw ParseError(lineno, "bad slot '" + key + "'");
            }
        } else {
            throw ParseError(lineno, "unknown name kind '" + kind + "'");
        }
    }
    return t;
}

NameTable NameTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open names file " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return parse(os.str());
}

std::optional<std::string> NameTable::slot_name(const SlotDescriptor& s) const {
    for (const auto& [d, n] : slots)
        if (d.same_slot(s)) return n;
    return std::nullopt;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void finish(Analysis& a, const Database& db, const KnowledgeBase& kb, const AnalysisOptions& o) {
    auto t = Clock::now();
    a.chains = all_call_chains(a.cfg, a.regions, o.max_depth);
    a.signatures = extract_signatures(a.cfg, a.regions, a.chains);
    a.times.signature_ms = ms_since(t);

    t = Clock::now();
    a.matches = match(a.signatures, db, o.match);
    a.times.match_ms = ms_since(t);

    t = Clock::now();
    a.detection = detect(detector_context(a, db, kb, o.match));
    a.times.detect_ms = ms_since(t);
}

}  // namespace

DetectorContext detector_context(const Analysis& a, const Database& db, const KnowledgeBase& kb,
                                 const MatchOptions& thresholds) {
    return DetectorContext{a.cfg, a.regions, a.signatures, a.chains, a.matches, db, kb, thresholds};
}

Analysis analyze(const Bytes& code, const Database& db, const KnowledgeBase& kb, const AnalysisOptions& o) {
    validate(o.match);
    if (o.max_depth == 0) throw Error("max depth must be at least 1");
    if (o.boundary != BoundaryMode::Heuristic && !o.model) throw Error("boundary mode requires a model file");
    Analysis a;

    auto t = Clock::now();
    auto stream = std::make_shared<const InstructionStream>(strip_trailer(decode(code)));
    a.times.decode_ms = ms_since(t);

    t = Clock::now();
    auto blocks = split_blocks(*stream);
    auto ex = explore(*stream, blocks, o.flow);
    a.cfg = ControlFlowGraph(stream, std::move(blocks), std::move(ex));
    a.times.flow_ms = ms_since(t);

    t = Clock::now();
    a.regions = recover_heuristic(a.cfg);
    if (o.boundary != BoundaryMode::Heuristic) {
        const auto labels = recover_model(*stream, *o.model, o.model_options);
        a.regions = merge_regions(a.regions, pair_labels(labels, stream->code_len()), o.boundary);
    }
    a.times.boundary_ms = ms_since(t);

    finish(a, db, kb, o);
    return a;
}

Analysis reanalyze_flow(const Analysis& base, const Database& db, const KnowledgeBase& kb, const AnalysisOptions& o) {
    Analysis a;
    auto stream = base.cfg.stream_ptr();
    auto blocks = split_blocks(*stream);
    auto ex = explore(*stream, blocks, o.flow);
    a.cfg = ControlFlowGraph(stream, std::move(blocks), std::move(ex));
    a.regions = base.regions;
    finish(a, db, kb, o);
    return a;
}

// ---------------------------------------------------------------------------

std::string Namer::region(std::uint32_t id) const {
    const auto& r = a_.regions.at(id);
    if (r.selector && names_ != nullptr) {
        if (auto it = names_->selectors.find(*r.selector); it != names_->selectors.end()) return it->second;
    }
    if (r.kind != RegionKind::Public || !r.selector) {
        if (const auto* m = best_match(a_.matches, id)) return db_.records[m->record].key.method;
    }
    if (r.selector) return format_selector(*r.selector);
    return "region#" + std::to_string(id);
}

std::string Namer::slot(const SlotDescriptor& s) const {
    if (names_ != nullptr)
        if (auto n = names_->slot_name(s)) return *n;
    return s.to_string();
}

std::string format_trace(const VulnerabilityTrace& t, const Namer& n) {
    std::string out;
    auto chain = [&](const std::vector<std::uint32_t>& c) {
        for (std::size_t i = 0; i < c.size(); ++i) out += (i ? " → " : "") + n.region(c[i]);
    };
    chain(t.chain);
    if (t.counterpart) {
        out += " | ";
        chain(t.counterpart->chain);
    }
    out += " → {";
    for (std::size_t i = 0; i < t.affected.size(); ++i) out += (i ? ", " : "") + n.slot(t.affected[i]);
    out += "}";
    return out;
}

namespace {

nlohmann::ordered_json selector_json(const std::optional<std::uint32_t>& s) {
    return s ? nlohmann::ordered_json(format_selector(*s)) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json knowledge_json(const KnowledgeEntry& e) {
    nlohmann::ordered_json j;
    j["kind"] = e.kind == KnowledgeEntry::Kind::Conflict ? "conflict" : "access-control";
    j["members"] = nlohmann::ordered_json::array();
    for (const auto& m : e.members) j["members"].push_back(m.str());
    if (e.kind == KnowledgeEntry::Kind::AccessControl) {
        j["params"] = e.guarded_params;
        j["guard"] = to_string(e.guard);
        j["sensitive"] = e.sensitive;
    }
    j["src"] = e.source;
    return j;
}

}  // namespace

nlohmann::ordered_json report_json(const std::vector<ContractReport>& reports, const Database& db,
                                   const KnowledgeBase& kb, bool timing) {
    nlohmann::ordered_json root;
    root["tool"] = "smvscan";
    root["contracts"] = nlohmann::ordered_json::array();
    std::size_t total = 0;
    for (const auto& rep : reports) {
        const auto& a = rep.analysis;
        const Namer namer(a, db, rep.names);
        nlohmann::ordered_json c;
        c["input"] = rep.input;
        c["code_len"] = a.cfg.stream().code_len();
        c["regions"] = nlohmann::ordered_json::array();
        for (const auto& r : a.regions) {
            nlohmann::ordered_json jr;
            jr["id"] = r.id;
            jr["start"] = r.start;
            jr["end"] = r.end;
            jr["kind"] = to_string(r.kind);
            jr["source"] = to_string(r.source);
            jr["selector"] = selector_json(r.selector);
            jr["name"] = namer.region(r.id);
            c["regions"].push_back(jr);
        }
        c["matches"] = nlohmann::ordered_json::array();
        for (const auto& m : a.matches) {
            const auto& k = db.records[m.record].key;
            c["matches"].push_back({{"region", m.region},
                                    {"subcontract", k.subcontract},
                                    {"version", k.version},
                                    {"method", k.method},
                                    {"p_t", m.p_t},
                                    {"p_n", m.p_n},
                                    {"best", m.best}});
        }
        auto chain_names = [&](const std::vector<std::uint32_t>& ch) {
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (auto id : ch) out.push_back(namer.region(id));
            return out;
        };
        c["traces"] = nlohmann::ordered_json::array();
        for (const auto& t : a.detection.traces) {
            const auto& ind = a.detection.indicators[t.indicator];
            nlohmann::ordered_json jt;
            jt["smv_type"] = to_string(t.type);
            jt["entry_selector"] = selector_json(t.entry_selector);
            jt["entry"] = namer.region(t.entry);
            jt["chain"] = chain_names(t.chain);
            jt["affected_slots"] = nlohmann::ordered_json::array();
            for (const auto& s : t.affected) jt["affected_slots"].push_back(namer.slot(s));
            nlohmann::ordered_json ev;
            ev["rule"] = to_string(ind.rule);
            ev["site_region"] = ind.site;
            ev["site_offset"] = a.regions[ind.site].start;
            ev["knowledge"] = ind.knowledge ? knowledge_json(kb.entries[*ind.knowledge]) : nlohmann::ordered_json(nullptr);
            ev["matches"] = nlohmann::ordered_json::array();
            for (auto mi : ind.matches) {
                const auto& m = a.matches[mi];
                ev["matches"].push_back({{"region", m.region},
                                         {"record", db.records[m.record].key.str()},
                                         {"p_t", m.p_t},
                                         {"p_n", m.p_n}});
            }
            ev["slot_descriptors"] = nlohmann::ordered_json::array();
            for (const auto& s : t.affected) ev["slot_descriptors"].push_back(s.to_string());
            if (!ind.call_sites.empty()) ev["call_sites"] = ind.call_sites;
            if (t.counterpart) {
                ev["counterpart"] = {{"entry_selector", selector_json(t.counterpart->entry_selector)},
                                     {"chain", chain_names(t.counterpart->chain)}};
            }
            jt["evidence"] = ev;
            jt["trace"] = format_trace(t, namer);
            c["traces"].push_back(jt);
        }
        total += a.detection.traces.size();
        c["warnings"] = nlohmann::ordered_json::array();
        for (auto i : a.detection.warnings) {
            const auto& ind = a.detection.indicators[i];
            c["warnings"].push_back({{"rule", to_string(ind.rule)},
                                     {"site", namer.region(ind.site)},
                                     {"reason", "no tainted state variable"}});
        }
        if (timing) {
            const auto& tm = a.times;
            c["timing_ms"] = {{"decode", tm.decode_ms},       {"flow", tm.flow_ms},   {"boundary", tm.boundary_ms},
                              {"signature", tm.signature_ms}, {"match", tm.match_ms}, {"detect", tm.detect_ms}};
        }
        root["contracts"].push_back(c);
    }
    root["summary"] = {{"contracts", reports.size()}, {"traces", total}};
    return root;
}

std::string report_text(const std::vector<ContractReport>& reports, const Database& db, const KnowledgeBase&,
                        bool timing) {
    std::ostringstream os;
    std::size_t total = 0;
    for (const auto& rep : reports) {
        const auto& a = rep.analysis;
        const Namer namer(a, db, rep.names);
        os << rep.input << ": " << a.regions.size() << " regions, " << a.matches.size() << " matches, "
           << a.detection.traces.size() << " traces\n";
        for (const auto& t : a.detection.traces) os << "  " << to_string(t.type) << ": " << format_trace(t, namer) << '\n';
        for (auto i : a.detection.warnings) {
            const auto& ind = a.detection.indicators[i];
            os << "  warning: " << to_string(ind.rule) << " at " << namer.region(ind.site)
               << " reaches no tainted state variable\n";
        }
        if (timing) {
            const auto& tm = a.times;
            os << "  timing(ms): decode " << tm.decode_ms << ", flow " << tm.flow_ms << ", boundary " << tm.boundary_ms
               << ", signature " << tm.signature_ms << ", match " << tm.match_ms << ", detect " << tm.detect_ms << '\n';
        }
        total += a.detection.traces.size();
    }
    os << reports.size() << " contract(s), " << total << " trace(s)\n";
    return os.str();
}

}  // namespace smvscan
