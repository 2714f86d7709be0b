// smvscan: subcontract misuse scanner.
//
//   smvscan scan INPUT... --db subcontracts.tsv --knowledge knowledge.tsv
//   smvscan db build --in DIR --manifest m.tsv [--out subcontracts.tsv]
//   smvscan report REPORT.json [--format text|json]
//
// Exit codes: 0 clean, 2 traces found, 1 error. Options fall back to
// SMVSCAN_* environment variables, then to defaults.

#include "smvscan/error.hpp"
#include "smvscan/pipeline.hpp"

#include <atomic>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

namespace fs = std::filesystem;
using namespace smvscan;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitError = 1;
constexpr int kExitTraces = 2;

struct ScanConfig {
    std::vector<std::string> inputs;
    std::string db;
    std::string knowledge;
    double theta1 = 0.82;
    double theta2 = 0.75;
    bool pn_verbatim = false;
    std::string boundary = "heuristic";
    std::string model;
    std::string format = "text";
    std::size_t max_depth = 5;
    std::size_t jobs = 1;
    bool timing = false;
    bool dump_cfg = false, dump_regions = false, dump_signatures = false, dump_matches = false;
    std::string out;
};

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw IoFailure("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write " + path);
    out << text;
}

BoundaryMode parse_mode(const std::string& s) {
    if (s == "heuristic") return BoundaryMode::Heuristic;
    if (s == "model") return BoundaryMode::Model;
    if (s == "both") return BoundaryMode::Both;
    throw std::invalid_argument("unknown boundary mode '" + s + "'");
}

std::string dumps(const ContractReport& rep, const Database& db, const ScanConfig& c) {
    const auto& a = rep.analysis;
    std::ostringstream os;
    if (c.dump_cfg) os << "# cfg " << rep.input << '\n' << a.cfg.dump();
    if (c.dump_regions) {
        os << "# regions " << rep.input << '\n';
        for (const auto& r : a.regions)
            os << r.start << ' ' << r.end << ' ' << to_string(r.kind) << ' ' << to_string(r.source) << '\n';
    }
    if (c.dump_signatures) {
        os << "# signatures " << rep.input << '\n';
        for (const auto& s : a.signatures)
            os << s.region_id << '\t' << format_symbols(s.intra) << '\t' << format_symbols(s.chain) << '\n';
    }
    if (c.dump_matches) {
        os << "# matches " << rep.input << '\n';
        for (const auto& m : a.matches) {
            const auto& k = db.records[m.record].key;
            os << m.region << '\t' << k.subcontract << '\t' << k.version << '\t' << k.method << '\t' << m.p_t << '\t'
               << m.p_n << '\t' << (m.best ? "best" : "-") << '\n';
        }
    }
    return os.str();
}

int cmd_scan(const ScanConfig& c) {
    AnalysisOptions opts;
    opts.match = {c.theta1, c.theta2, c.pn_verbatim};
    validate(opts.match);
    opts.boundary = parse_mode(c.boundary);
    if (opts.boundary != BoundaryMode::Heuristic && c.model.empty())
        throw std::invalid_argument("--boundary " + c.boundary + " requires --model");
    if (opts.boundary == BoundaryMode::Heuristic && !c.model.empty())
        throw std::invalid_argument("--model is only used with --boundary model|both");
    if (!c.model.empty()) opts.model = std::make_shared<const ModelWeights>(ModelWeights::load(c.model));
    opts.model_options.jobs = c.jobs;
    opts.max_depth = c.max_depth;
    if (c.format != "text" && c.format != "json") throw std::invalid_argument("unknown format '" + c.format + "'");

    if (!fs::exists(c.db)) throw IoFailure("database not found: " + c.db);
    const auto db = load_db(c.db);
    KnowledgeBase kb;
    if (!c.knowledge.empty()) {
        if (!fs::exists(c.knowledge)) throw IoFailure("knowledge file not found: " + c.knowledge);
        kb = load_knowledge(c.knowledge);
    }
    for (const auto& m : kb.unresolved(db)) std::cerr << "smvscan: knowledge member " << m << " is not in the database\n";

    std::vector<Bytes> codes;
    std::vector<std::unique_ptr<NameTable>> names;
    for (const auto& in : c.inputs) {
        codes.push_back(read_bytecode_file(in));
        auto np = fs::path(in).replace_extension(".names");
        names.push_back(fs::exists(np) ? std::make_unique<NameTable>(NameTable::load(np)) : nullptr);
    }

    std::vector<std::optional<Analysis>> results(codes.size());
    std::vector<std::string> errors(codes.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < codes.size();) {
            try {
                results[i] = analyze(codes[i], db, kb, opts);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    const auto n = std::max<std::size_t>(1, std::min(c.jobs, codes.size()));
    for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    bool failed = false;
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) {
            std::cerr << "smvscan: " << c.inputs[i] << ": " << errors[i] << '\n';
            failed = true;
        }
    if (failed) return kExitError;

    std::vector<ContractReport> reports;
    std::size_t traces = 0;
    std::string dumped;
    for (std::size_t i = 0; i < codes.size(); ++i) {
        reports.push_back({c.inputs[i], std::move(*results[i]), names[i].get()});
        traces += reports.back().analysis.detection.traces.size();
        dumped += dumps(reports.back(), db, c);
    }
    std::cout << dumped;
    const auto text = c.format == "json" ? report_json(reports, db, kb, c.timing).dump(2) + "\n"
                                         : report_text(reports, db, kb, c.timing);
    write_output(c.out, text);
    return traces > 0 ? kExitTraces : kExitClean;
}

int cmd_db_build(const std::string& in_dir, const std::string& manifest, const std::string& out, std::size_t depth) {
    const auto rows = parse_manifest(read_text(manifest));
    const auto result = build_db(in_dir, rows, depth);
    for (const auto& e : result.errors) std::cerr << "smvscan: " << e << '\n';
    write_output(out, format_db(result.db));
    if (!rows.empty() && result.db.records.empty()) return kExitError;
    return kExitClean;
}

int cmd_report(const std::string& path, const std::string& format) {
    const auto j = nlohmann::ordered_json::parse(read_text(path));
    if (format == "json") {
        std::cout << j.dump(2) << '\n';
    } else {
        std::size_t total = 0;
        for (const auto& c : j.at("contracts")) {
            std::cout << c.at("input").get<std::string>() << ": " << c.at("traces").size() << " traces\n";
            for (const auto& t : c.at("traces"))
                std::cout << "  " << t.at("smv_type").get<std::string>() << ": " << t.at("trace").get<std::string>()
                          << '\n';
            total += c.at("traces").size();
        }
        std::cout << j.at("contracts").size() << " contract(s), " << total << " trace(s)\n";
    }
    std::size_t traces = 0;
    for (const auto& c : j.at("contracts")) traces += c.at("traces").size();
    return traces > 0 ? kExitTraces : kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subcontract misuse vulnerability scanner"};
    app.require_subcommand(1);

    ScanConfig c;
    auto* scan = app.add_subcommand("scan", "Analyze runtime bytecode files");
    scan->add_option("inputs", c.inputs, "Hex bytecode files")->required()->check(CLI::ExistingFile);
    scan->add_option("--db", c.db, "Subcontract database")->envname("SMVSCAN_DB")->required();
    scan->add_option("--knowledge", c.knowledge, "Apriori knowledge file")->envname("SMVSCAN_KNOWLEDGE");
    scan->add_option("--theta1", c.theta1, "Opcode type similarity threshold")->envname("SMVSCAN_THETA1");
    scan->add_option("--theta2", c.theta2, "Opcode length similarity threshold")->envname("SMVSCAN_THETA2");
    scan->add_flag("--pn-verbatim", c.pn_verbatim, "Use the unsymmetrized length ratio")->envname("SMVSCAN_PN_VERBATIM");
    scan->add_option("--boundary", c.boundary, "heuristic|model|both")->envname("SMVSCAN_BOUNDARY");
    scan->add_option("--model", c.model, "SMVW weight file")->envname("SMVSCAN_MODEL");
    scan->add_option("--format", c.format, "text|json")->envname("SMVSCAN_FORMAT");
    scan->add_option("--max-depth", c.max_depth, "Call chain depth bound")->envname("SMVSCAN_MAX_DEPTH");
    scan->add_option("--jobs", c.jobs, "Contracts analyzed concurrently")->envname("SMVSCAN_JOBS")->check(CLI::PositiveNumber);
    scan->add_flag("--timing", c.timing, "Report per-stage times");
    scan->add_flag("--dump-cfg", c.dump_cfg, "Print CFG edges");
    scan->add_flag("--dump-regions", c.dump_regions, "Print method regions");
    scan->add_flag("--dump-signatures", c.dump_signatures, "Print method signatures");
    scan->add_flag("--dump-matches", c.dump_matches, "Print reuse matches");
    scan->add_option("-o,--out", c.out, "Report file (default stdout)");

    auto* db = app.add_subcommand("db", "Database maintenance");
    db->require_subcommand(1);
    auto* build = db->add_subcommand("build", "Build subcontracts.tsv from compiled subcontracts");
    std::string in_dir, manifest, db_out;
    std::size_t db_depth = 5;
    build->add_option("--in", in_dir, "Directory of hex bytecode files")->required()->check(CLI::ExistingDirectory);
    build->add_option("--manifest", manifest, "Manifest TSV")->required()->check(CLI::ExistingFile);
    build->add_option("--out", db_out, "Output database (default stdout)");
    build->add_option("--max-depth", db_depth, "Call chain depth bound")->envname("SMVSCAN_MAX_DEPTH");

    auto* report = app.add_subcommand("report", "Render a saved JSON report");
    std::string report_path, report_format = "text";
    report->add_option("report", report_path, "JSON report")->required()->check(CLI::ExistingFile);
    report->add_option("--format", report_format, "text|json")->envname("SMVSCAN_FORMAT");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitClean : kExitError;
    }
    try {
        if (*scan) return cmd_scan(c);
        if (*build) return cmd_db_build(in_dir, manifest, db_out, db_depth);
        return cmd_report(report_path, report_format);
    } catch (const std::exception& e) {
        std::cerr << "smvscan: " << e.what() << '\n';
        return kExitError;
    }
}
