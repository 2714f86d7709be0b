#include "fixture_util.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace smvscan::testing {

std::vector<Expected> expected_corpus() {
    std::ifstream in(source_dir() / "fixtures" / "expected.tsv");
    std::vector<Expected> out;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        Expected e;
        std::getline(ls, e.contract, '\t');
        std::getline(ls, e.type, '\t');
        std::getline(ls, e.trace);
        out.push_back(e);
    }
    return out;
}

std::vector<std::string> contract_names() {
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(contracts_dir()))
        if (e.path().extension() == ".hex") out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

Scanned scan(const std::string& name, const AnalysisOptions& opts) {
    const auto base = contracts_dir() / name;
    Scanned s{analyze(read_bytecode_file(base.string() + ".hex"), fixture_db(), fixture_kb(), opts), {}, {}};
    const auto names = std::filesystem::path(base.string() + ".names");
    if (std::filesystem::exists(names)) s.names = NameTable::load(names);
    const Namer namer(s.analysis, fixture_db(), &s.names);
    for (const auto& t : s.analysis.detection.traces)
        s.traces.push_back(std::string(to_string(t.type)) + "\t" + format_trace(t, namer));
    return s;
}

}  // namespace smvscan::testing
