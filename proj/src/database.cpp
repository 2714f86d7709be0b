#include "smvscan/database.hpp"

#include "smvscan/boundary.hpp"
#include "smvscan/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace smvscan {

std::string_view to_string(Visibility v) noexcept { return v == Visibility::Public ? "public" : "internal"; }

std::string_view to_string(GuardKind g) noexcept {
    switch (g) {
        case GuardKind::CallerCheck: return "caller-check";
        case GuardKind::ValueBound: return "value-bound";
        case GuardKind::ReentrancyGuard: return "reentrancy-guard";
    }
    return "?";
}

std::string RecordKey::str() const { return subcontract + "." + method + "@" + version; }

MethodSignature signature_of_db_method(const SubcontractRecord& r) {
    MethodSignature s;
    s.intra = parse_symbols(r.intra_sig, r.key.str());
    s.chain = parse_symbols(r.chain_sig, r.key.str());
    return s;
}

void Database::add(SubcontractRecord r) {
    for (const auto& e : records)
        if (e.key == r.key) throw DuplicateKey("duplicate record " + r.key.str());
    auto sig = signature_of_db_method(r);
    sig.region_id = static_cast<std::uint32_t>(records.size());
    records.push_back(std::move(r));
    signatures.push_back(std::move(sig));
}

const SubcontractRecord* Database::find(std::string_view subcontract, std::string_view method) const {
    for (const auto& r : records)
        if (r.key.subcontract == subcontract && r.key.method == method) return &r;
    return nullptr;
}

namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoFailure("cannot write " + p.string());
    out << text;
    if (!out) throw IoFailure("short write to " + p.string());
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (true) {
        const auto j = line.find(sep, i);
        out.emplace_back(line.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
        if (j == std::string_view::npos) break;
        i = j + 1;
    }
    return out;
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

bool blank_or_comment(std::string_view line) {
    const auto p = line.find_first_not_of(" \t\r");
    return p == std::string_view::npos || line[p] == '#';
}

std::optional<std::uint64_t> parse_hex_number(std::string_view s) {
    if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X') || s.size() > 18) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s.substr(2)) {
        if (!std::isxdigit(static_cast<unsigned char>(c))) return std::nullopt;
        v = v << 4 | static_cast<std::uint64_t>(std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                                                                                           : std::tolower(c) - 'a' + 10);
    }
    return v;
}

std::optional<std::uint32_t> parse_selector(std::string_view s) {
    if (s.size() != 10) return std::nullopt;
    const auto v = parse_hex_number(s);
    if (!v) return std::nullopt;
    return static_cast<std::uint32_t>(*v);
}

std::optional<Visibility> parse_visibility(std::string_view s) {
    if (s == "public") return Visibility::Public;
    if (s == "internal") return Visibility::Internal;
    return std::nullopt;
}

std::optional<MethodRef> parse_ref(std::string_view s) {
    const auto dot = s.find('.');
    if (dot == std::string_view::npos || dot == 0 || dot + 1 >= s.size()) return std::nullopt;
    return MethodRef{std::string(s.substr(0, dot)), std::string(s.substr(dot + 1))};
}

constexpr std::string_view kDbHeader = "# subcontract\tversion\tmethod\tselector\tintra_sig\tchain_sig\tvisibility\n";
constexpr std::string_view kKbHeader = "# kind\tmembers...\tattributes (key=value)\n";

}  // namespace

Database parse_db(std::string_view text) {
    Database db;
    std::size_t lineno = 0;
    for (auto line : split(text, '\n')) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (blank_or_comment(line)) continue;
        const auto f = split(line, '\t');
        if (f.size() != 7) throw ParseError(lineno, "expected 7 tab-separated fields, found " + std::to_string(f.size()));
        for (std::size_t i = 0; i < 3; ++i)
            if (f[i].empty()) throw ParseError(lineno, "empty key field");
        SubcontractRecord r;
        r.key = {f[0], f[1], f[2]};
        if (f[3] != "-") {
            r.selector = parse_selector(f[3]);
            if (!r.selector) throw ParseError(lineno, "bad selector '" + f[3] + "'");
        }
        r.intra_sig = f[4] == "-" ? "" : f[4];
        r.chain_sig = f[5] == "-" ? "" : f[5];
        const auto vis = parse_visibility(f[6]);
        if (!vis) throw ParseError(lineno, "bad visibility '" + f[6] + "'");
        r.visibility = *vis;
        db.add(std::move(r));
    }
    return db;
}

Database load_db(const std::filesystem::path& path) { return parse_db(read_file(path)); }

std::string format_db(const Database& db) {
    std::string out(kDbHeader);
    for (const auto& r : db.records) {
        out += r.key.subcontract + '\t' + r.key.version + '\t' + r.key.method + '\t';
        out += r.selector ? format_selector(*r.selector) : "-";
        out += '\t';
        out += r.intra_sig.empty() ? "-" : format_symbols(parse_symbols(r.intra_sig));
        out += '\t';
        out += r.chain_sig.empty() ? "-" : format_symbols(parse_symbols(r.chain_sig));
        out += '\t';
        out += to_string(r.visibility);
        out += '\n';
    }
    return out;
}

void save_db(const Database& db, const std::filesystem::path& path) { write_file(path, format_db(db)); }

// ---------------------------------------------------------------------------

bool KnowledgeBase::conflicting(const MethodRef& a, const MethodRef& b) const {
    for (const auto& e : entries)
        if (e.kind == KnowledgeEntry::Kind::Conflict &&
            ((e.members[0] == a && e.members[1] == b) || (e.members[0] == b && e.members[1] == a)))
            return true;
    return false;
}

const KnowledgeEntry* KnowledgeBase::access_control(const MethodRef& m) const {
    for (const auto& e : entries)
        if (e.kind == KnowledgeEntry::Kind::AccessControl && e.members[0] == m) return &e;
    return nullptr;
}

std::vector<std::string> KnowledgeBase::unresolved(const Database& db) const {
    std::vector<std::string> out;
    for (const auto& e : entries)
        for (const auto& m : e.members)
            if (db.find(m.subcontract, m.method) == nullptr) out.push_back(m.str());
    return out;
}

KnowledgeBase parse_knowledge(std::string_view text) {
    KnowledgeBase kb;
    std::size_t lineno = 0;
    for (auto line : split(text, '\n')) {
        ++lineno;
        if (blank_or_comment(line)) continue;
        const auto tok = split_ws(line);
        KnowledgeEntry e;
        std::size_t expected_members;
        if (tok[0] == "conflict") {
            e.kind = KnowledgeEntry::Kind::Conflict;
            expected_members = 2;
        } else if (tok[0] == "access-control") {
            e.kind = KnowledgeEntry::Kind::AccessControl;
            expected_members = 1;
        } else {
            throw UnknownKind("line " + std::to_string(lineno) + ": unknown knowledge kind '" + tok[0] + "'");
        }
        std::map<std::string, std::string> attrs;
        for (std::size_t i = 1; i < tok.size(); ++i) {
            const auto eq = tok[i].find('=');
            if (eq == std::string::npos) {
                const auto ref = parse_ref(tok[i]);
                if (!ref) throw ParseError(lineno, "bad member '" + tok[i] + "', expected Subcontract.method");
                e.members.push_back(*ref);
            } else if (!attrs.emplace(tok[i].substr(0, eq), tok[i].substr(eq + 1)).second) {
                throw ParseError(lineno, "repeated attribute " + tok[i].substr(0, eq));
            }
        }
        if (e.members.size() != expected_members)
            throw ParseError(lineno, tok[0] + " needs " + std::to_string(expected_members) + " member(s)");
        if (e.kind == KnowledgeEntry::Kind::Conflict && e.members[0] == e.members[1])
            throw ParseError(lineno, "conflict members must differ");
        auto take = [&](const std::string& k) -> std::string {
            auto it = attrs.find(k);
            if (it == attrs.end() || it->second.empty()) throw ParseError(lineno, "missing " + k + "=");
            auto v = it->second;
            attrs.erase(it);
            return v;
        };
        e.source = take("src");
        if (e.kind == KnowledgeEntry::Kind::AccessControl) {
            for (const auto& p : split(take("params"), ',')) {
                if (p.empty() || !std::all_of(p.begin(), p.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
                    std::stoul(p) == 0)
                    throw ParseError(lineno, "bad parameter index '" + p + "'");
                e.guarded_params.push_back(static_cast<unsigned>(std::stoul(p)));
            }
            const auto g = take("guard");
            if (g == "caller-check") e.guard = GuardKind::CallerCheck;
            else if (g == "value-bound") e.guard = GuardKind::ValueBound;
            else if (g == "reentrancy-guard") e.guard = GuardKind::ReentrancyGuard;
            else throw ParseError(lineno, "unknown guard '" + g + "'");
            e.sensitive = take("sensitive");
        }
        if (!attrs.empty()) throw ParseError(lineno, "unexpected attribute " + attrs.begin()->first);
        kb.entries.push_back(std::move(e));
    }
    return kb;
}

KnowledgeBase load_knowledge(const std::filesystem::path& path) { return parse_knowledge(read_file(path)); }

std::string format_knowledge(const KnowledgeBase& kb) {
    std::string out(kKbHeader);
    for (const auto& e : kb.entries) {
        if (e.kind == KnowledgeEntry::Kind::Conflict) {
            out += "conflict\t" + e.members[0].str() + '\t' + e.members[1].str();
        } else {
            out += "access-control\t" + e.members[0].str() + "\tparams=";
            for (std::size_t i = 0; i < e.guarded_params.size(); ++i)
                out += (i ? "," : "") + std::to_string(e.guarded_params[i]);
            out += "\tguard=" + std::string(to_string(e.guard)) + "\tsensitive=" + e.sensitive;
        }
        out += "\tsrc=" + e.source + '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<ManifestRow> parse_manifest(std::string_view text) {
    std::vector<ManifestRow> out;
    std::size_t lineno = 0;
    for (auto line : split(text, '\n')) {
        ++lineno;
        if (blank_or_comment(line)) continue;
        const auto f = split_ws(line);
        if (f.size() != 6) throw ParseError(lineno, "expected 6 manifest fields, found " + std::to_string(f.size()));
        ManifestRow row;
        row.file = f[0];
        row.key = {f[1], f[2], f[3]};
        if (f[4].rfind("selector:", 0) == 0) {
            row.selector = parse_selector(f[4].substr(9));
        } else if (f[4].rfind("offset:", 0) == 0) {
            if (auto v = parse_hex_number(f[4].substr(7))) row.offset = static_cast<std::size_t>(*v);
        }
        if (!row.selector && !row.offset) throw ParseError(lineno, "bad locator '" + f[4] + "'");
        const auto vis = parse_visibility(f[5]);
        if (!vis) throw ParseError(lineno, "bad visibility '" + f[5] + "'");
        row.visibility = *vis;
        out.push_back(std::move(row));
    }
    return out;
}

BuildResult build_db(const std::filesystem::path& dir, const std::vector<ManifestRow>& manifest, std::size_t max_depth) {
    struct Analyzed {
        ControlFlowGraph cfg;
        std::vector<MethodRegion> regions;
        std::vector<MethodSignature> sigs;
    };
    std::map<std::string, Analyzed> cache;
    std::vector<SubcontractRecord> records;
    BuildResult result;
    for (const auto& row : manifest) {
        try {
            auto it = cache.find(row.file);
            if (it == cache.end()) {
                Analyzed a;
                a.cfg = build_cfg(strip_trailer(decode(read_bytecode_file(dir / row.file))));
                a.regions = recover_heuristic(a.cfg);
                a.sigs = extract_signatures(a.cfg, a.regions, all_call_chains(a.cfg, a.regions, max_depth));
                it = cache.emplace(row.file, std::move(a)).first;
            }
            const auto& a = it->second;
            const MethodRegion* region = nullptr;
            for (const auto& r : a.regions) {
                if (row.selector && r.kind == RegionKind::Public && r.selector == row.selector) region = &r;
                if (row.offset && r.start == *row.offset && region == nullptr) region = &r;
            }
            if (region == nullptr)
                throw Error("no recovered region for " + row.key.str() + " in " + row.file);
            SubcontractRecord rec;
            rec.key = row.key;
            rec.selector = row.selector;
            rec.intra_sig = format_symbols(a.sigs[region->id].intra);
            rec.chain_sig = format_symbols(a.sigs[region->id].chain);
            rec.visibility = row.visibility;
            records.push_back(std::move(rec));
        } catch (const Error& e) {
            result.errors.push_back(row.file + ": " + e.what());
        }
    }
    std::stable_sort(records.begin(), records.end(),
                     [](const SubcontractRecord& a, const SubcontractRecord& b) { return a.key < b.key; });
    for (auto& r : records) {
        try {
            result.db.add(std::move(r));
        } catch (const DuplicateKey& e) {
            result.errors.push_back(e.what());
        }
    }
    return result;
}

}  // namespace smvscan
