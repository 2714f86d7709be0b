#include "smvscan/assembler.hpp"

#include "smvscan/keccak.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace smvscan {

const MethodSpan* Assembly::span(std::string_view name) const {
    for (const auto& s : spans)
        if (s.name == name) return &s;
    return nullptr;
}

std::size_t Assembly::label(std::string_view name) const {
    auto it = labels.find(std::string(name));
    if (it == labels.end()) throw AssemblyError("unknown label " + std::string(name));
    return it->second;
}

namespace {

struct Line {
    std::string where;  // file:line for diagnostics
    std::vector<std::string> tokens;
};

struct Macro {
    std::vector<Line> body;
    std::size_t arity = 0;  // highest $n in the body
};

std::vector<std::string> tokenize_line(std::string_view text) {
    if (auto p = text.find(';'); p != std::string_view::npos) text = text.substr(0, p);
    if (auto p = text.find("//"); p != std::string_view::npos) text = text.substr(0, p);
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i >= text.size()) break;
        std::size_t j = i;
        if (text[i] == '"') {
            j = text.find('"', i + 1);
            if (j == std::string_view::npos) j = text.size(); else ++j;
        } else {
            while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        }
        out.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return out;
}

std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw AssemblyError("cannot open " + p.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

class Preprocessor {
public:
    std::vector<Line> run(std::string_view source, const std::string& name,
                          const std::filesystem::path& dir) {
        std::vector<Line> out;
        load(source, name, dir, out);
        return out;
    }

private:
    std::map<std::string, Macro> macros_;
    std::set<std::string> included_;
    std::size_t expansion_ = 0;

    void load(std::string_view source, const std::string& name, const std::filesystem::path& dir,
              std::vector<Line>& out) {
        std::istringstream in{std::string(source)};
        std::string raw;
        std::size_t lineno = 0;
        Macro* defining = nullptr;
        while (std::getline(in, raw)) {
            ++lineno;
            Line line{name + ":" + std::to_string(lineno), tokenize_line(raw)};
            if (line.tokens.empty()) continue;
            const auto& head = line.tokens[0];
            if (defining != nullptr) {
                if (head == ".endm") {
                    defining = nullptr;
                    continue;
                }
                for (const auto& tok : line.tokens)
                    for (std::size_t i = 0; i + 1 < tok.size(); ++i)
                        if (tok[i] == '$' && std::isdigit(static_cast<unsigned char>(tok[i + 1])))
                            defining->arity = std::max<std::size_t>(defining->arity, tok[i + 1] - '0');
                defining->body.push_back(line);
                continue;
            }
            if (head == ".macro") {
                if (line.tokens.size() != 2) throw AssemblyError(line.where + ": .macro needs a name");
                defining = &macros_[line.tokens[1]];
                *defining = Macro{};
            } else if (head == ".include") {
                if (line.tokens.size() != 2) throw AssemblyError(line.where + ": .include needs a path");
                std::string file = line.tokens[1];
                if (file.size() >= 2 && file.front() == '"') file = file.substr(1, file.size() - 2);
                const auto path = std::filesystem::weakly_canonical(dir / file);
                if (!included_.insert(path.string()).second) continue;
                load(read_text(path), path.filename().string(), path.parent_path(), out);
            } else {
                emit(line, out);
            }
        }
        if (defining != nullptr) throw AssemblyError(name + ": unterminated .macro");
    }

    static bool is_call(const std::string& tok) { return tok.size() > 1 && tok[0] == '%' && tok[1] != '%'; }

    /// Splits a line at macro invocations; each `%NAME` takes as many
    /// following tokens as its body references.
    void emit(const Line& line, std::vector<Line>& out) {
        Line plain{line.where, {}};
        auto flush = [&] {
            if (!plain.tokens.empty()) out.push_back(plain);
            plain.tokens.clear();
        };
        for (std::size_t i = 0; i < line.tokens.size(); ++i) {
            if (!is_call(line.tokens[i])) {
                plain.tokens.push_back(line.tokens[i]);
                continue;
            }
            flush();
            const auto name = line.tokens[i].substr(1);
            auto it = macros_.find(name);
            if (it == macros_.end()) throw AssemblyError(line.where + ": unknown macro " + name);
            const auto arity = it->second.arity;
            if (i + arity >= line.tokens.size())
                throw AssemblyError(line.where + ": macro " + name + " expects " + std::to_string(arity) + " arguments");
            std::vector<std::string> args(line.tokens.begin() + static_cast<std::ptrdiff_t>(i + 1),
                                          line.tokens.begin() + static_cast<std::ptrdiff_t>(i + 1 + arity));
            expand(it->second, name, args, line.where, out);
            i += arity;
        }
        flush();
    }

    void expand(const Macro& m, const std::string& name, const std::vector<std::string>& args,
                const std::string& where, std::vector<Line>& out) {
        const std::string unique = "__m" + std::to_string(expansion_++) + "_";
        for (const auto& body : m.body) {
            Line line{where + " (in %" + name + ")", {}};
            for (const auto& tok : body.tokens) {
                std::string res;
                for (std::size_t i = 0; i < tok.size(); ++i) {
                    if (tok[i] == '$' && i + 1 < tok.size() && std::isdigit(static_cast<unsigned char>(tok[i + 1]))) {
                        const std::size_t arg = static_cast<std::size_t>(tok[i + 1] - '0');
                        if (arg == 0 || arg > args.size())
                            throw AssemblyError(where + ": macro argument $" + std::to_string(arg) + " missing");
                        res += args[arg - 1];
                        ++i;
                    } else if (tok.compare(i, 2, "%%") == 0) {
                        res += unique;
                        ++i;
                    } else {
                        res += tok[i];
                    }
                }
                line.tokens.push_back(std::move(res));
            }
            emit(line, out);
        }
    }
};

Word parse_number(const std::string& tok, const std::string& where) {
    try {
        if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
            Word w = 0;
            for (std::size_t i = 2; i < tok.size(); ++i) {
                const char c = tok[i];
                int d = std::isdigit(static_cast<unsigned char>(c)) ? c - '0'
                      : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                      : (c >= 'A' && c <= 'F') ? c - 'A' + 10 : -1;
                if (d < 0 || i >= 66) throw std::invalid_argument(tok);
                w = w << 4 | d;
            }
            return w;
        }
        if (tok.empty() || !std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
            throw std::invalid_argument(tok);
        return Word(tok);
    } catch (const std::exception&) {
        throw AssemblyError(where + ": bad numeric operand '" + tok + "'");
    }
}

unsigned minimal_width(const Word& w) {
    unsigned n = 1;
    while (n < 32 && (w >> (8 * n)) != 0) ++n;
    return n;
}

void emit_word(Bytes& code, const Word& w, unsigned width) {
    for (unsigned k = 0; k < width; ++k)
        code.push_back(static_cast<std::uint8_t>((w >> (8 * (width - 1 - k))) & 0xff));
}

Bytes metadata_blob(const Bytes& code) {
    const auto digest = keccak256(std::span<const std::uint8_t>(code));
    Bytes b = {0xa2, 0x64, 'i', 'p', 'f', 's', 0x58, 0x22, 0x12, 0x20};
    for (auto d : digest) b.push_back(d);
    for (int c : {0x64, 's' + 0, 'o' + 0, 'l' + 0, 'c' + 0, 0x43, 0x00, 0x08, 0x13}) b.push_back(static_cast<std::uint8_t>(c));
    const std::size_t len = b.size();
    b.push_back(static_cast<std::uint8_t>(len >> 8));
    b.push_back(static_cast<std::uint8_t>(len & 0xff));
    return b;
}

struct Fixup {
    std::size_t at;
    std::string label;
    std::string where;
};

}  // namespace

Assembly assemble(std::string_view source, const std::filesystem::path& include_dir) {
    Preprocessor pre;
    const auto lines = pre.run(source, "<input>", include_dir);

    Assembly out;
    std::vector<Fixup> fixups;
    std::map<std::string, std::size_t> open_spans;
    bool sealed = false;

    for (const auto& line : lines) {
        const auto& toks = line.tokens;
        if (sealed) throw AssemblyError(line.where + ": code after .metadata");
        if (toks[0] == ".begin" || toks[0] == ".end") {
            if (toks.size() != 2) throw AssemblyError(line.where + ": " + toks[0] + " needs a name");
            if (toks[0] == ".begin") {
                open_spans[toks[1]] = out.code.size();
            } else {
                auto it = open_spans.find(toks[1]);
                if (it == open_spans.end()) throw AssemblyError(line.where + ": .end without .begin " + toks[1]);
                out.spans.push_back({toks[1], it->second, out.code.size()});
                open_spans.erase(it);
            }
            continue;
        }
        if (toks[0] == ".byte") {
            for (std::size_t i = 1; i < toks.size(); ++i) {
                const Word w = parse_number(toks[i], line.where);
                if (w > 0xff) throw AssemblyError(line.where + ": .byte operand exceeds 0xff");
                out.code.push_back(static_cast<std::uint8_t>(w));
            }
            continue;
        }
        if (toks[0] == ".metadata") {
            const auto blob = metadata_blob(out.code);
            out.code.insert(out.code.end(), blob.begin(), blob.end());
            sealed = true;
            continue;
        }
        for (std::size_t i = 0; i < toks.size(); ++i) {
            const auto& tok = toks[i];
            if (tok.back() == ':') {
                const auto name = tok.substr(0, tok.size() - 1);
                if (!out.labels.emplace(name, out.code.size()).second)
                    throw AssemblyError(line.where + ": duplicate label " + name);
                continue;
            }
            std::string upper;
            for (char c : tok) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
            const bool auto_push = upper == "PUSH";
            const auto op = auto_push ? std::optional<std::uint8_t>(0x60) : opcode_from_name(upper);
            if (!op) throw AssemblyError(line.where + ": unknown mnemonic '" + tok + "'");
            if (!auto_push && !is_push(*op)) {
                out.code.push_back(*op);
                continue;
            }
            if (i + 1 >= toks.size()) throw AssemblyError(line.where + ": push without operand");
            const auto& arg = toks[++i];
            unsigned width = auto_push ? 0 : push_size(*op);
            if (arg.rfind("@sel(", 0) == 0 && arg.back() == ')') {
                const auto sel = selector_of(std::string_view(arg).substr(5, arg.size() - 6));
                if (width == 0) width = 4;
                out.code.push_back(static_cast<std::uint8_t>(0x5f + width));
                emit_word(out.code, Word(sel), width);
            } else if (arg[0] == '@') {
                if (width == 0) width = 2;
                out.code.push_back(static_cast<std::uint8_t>(0x5f + width));
                fixups.push_back({out.code.size(), arg.substr(1), line.where});
                emit_word(out.code, 0, width);
                if (width != 2) throw AssemblyError(line.where + ": label pushes must be 2 bytes wide");
            } else {
                const Word w = parse_number(arg, line.where);
                if (width == 0) width = minimal_width(w);
                if (minimal_width(w) > width) throw AssemblyError(line.where + ": operand too wide for push");
                out.code.push_back(static_cast<std::uint8_t>(0x5f + width));
                emit_word(out.code, w, width);
            }
        }
    }
    if (!open_spans.empty()) throw AssemblyError("unterminated .begin " + open_spans.begin()->first);
    for (const auto& f : fixups) {
        auto it = out.labels.find(f.label);
        if (it == out.labels.end()) throw AssemblyError(f.where + ": undefined label " + f.label);
        if (it->second > 0xffff) throw AssemblyError(f.where + ": label beyond 16-bit range");
        out.code[f.at] = static_cast<std::uint8_t>(it->second >> 8);
        out.code[f.at + 1] = static_cast<std::uint8_t>(it->second & 0xff);
    }
    return out;
}

Assembly assemble_file(const std::filesystem::path& path) {
    return assemble(read_text(path), path.parent_path());
}

}  // namespace smvscan
