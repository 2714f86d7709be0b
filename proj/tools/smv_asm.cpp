// smv-asm: assembles fixture sources and resolves DB manifests.
//
//   smv-asm build SRC [-o OUT.hex] [--spans]
//   smv-asm manifest IN --src-dir DIR [-o OUT]
//
// Manifest input rows may use `span:NAME` (a .begin/.end span of the source
// that assembles to the row's file) and `selector:f(types)`; both are
// rewritten to the `offset:`/`selector:0x` forms that `smvscan db build` reads.

#include "smvscan/assembler.hpp"
#include "smvscan/keccak.hpp"
#include "smvscan/region.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"

namespace fs = std::filesystem;
using namespace smvscan;

namespace {

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw IoFailure("cannot write " + path);
    out << text;
}

std::string hex_of(std::size_t v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%zx", v);
    return buf;
}

std::string resolve_manifest(const std::string& in_path, const fs::path& src_dir) {
    std::ifstream in(in_path);
    if (!in) throw IoFailure("cannot open " + in_path);
    std::map<std::string, Assembly> cache;
    std::ostringstream out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::vector<std::string> f;
        for (std::string t; ls >> t;) f.push_back(t);
        if (f.empty() || f[0][0] == '#') {
            out << line << '\n';
            continue;
        }
        if (f.size() != 6) throw ParseError(lineno, "expected 6 manifest fields");
        auto& loc = f[4];
        if (loc.rfind("span:", 0) == 0) {
            auto it = cache.find(f[0]);
            if (it == cache.end()) {
                const auto src = src_dir / fs::path(f[0]).replace_extension(".easm");
                it = cache.emplace(f[0], assemble_file(src)).first;
            }
            const auto* span = it->second.span(loc.substr(5));
            if (span == nullptr) throw ParseError(lineno, "no span " + loc.substr(5) + " in " + f[0]);
            loc = "offset:" + hex_of(span->start);
        } else if (loc.rfind("selector:", 0) == 0 && loc.find('(') != std::string::npos) {
            loc = "selector:" + format_selector(selector_of(loc.substr(9)));
        }
        for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "\t" : "") << f[i];
        out << '\n';
    }
    return out.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EVM fixture assembler"};
    app.require_subcommand(1);

    auto* build = app.add_subcommand("build", "Assemble a source file to hex");
    std::string src, out;
    bool spans = false;
    build->add_option("source", src, "Assembly source")->required()->check(CLI::ExistingFile);
    build->add_option("-o,--output", out, "Output hex file (default stdout)");
    build->add_flag("--spans", spans, "Print method spans to stderr");

    auto* manifest = app.add_subcommand("manifest", "Resolve span and signature locators");
    std::string in_path, src_dir, mout;
    manifest->add_option("input", in_path, "Manifest template")->required()->check(CLI::ExistingFile);
    manifest->add_option("--src-dir", src_dir, "Directory of the harness sources")->required();
    manifest->add_option("-o,--output", mout, "Output manifest (default stdout)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*build) {
            const auto a = assemble_file(src);
            write_text(out, to_hex(a.code, false) + "\n");
            if (spans)
                for (const auto& s : a.spans)
                    std::cerr << s.name << '\t' << hex_of(s.start) << '\t' << hex_of(s.end) << '\n';
        } else {
            write_text(mout, resolve_manifest(in_path, src_dir));
        }
    } catch (const std::exception& e) {
        std::cerr << "smv-asm: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
