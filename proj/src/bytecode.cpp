#include "smvscan/bytecode.hpp"

#include "smvscan/error.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace smvscan {

std::string to_hex(const Word& w) {
    std::ostringstream os;
    os << "0x" << std::hex << w;
    return os.str();
}

std::optional<std::uint64_t> as_offset(const Word& w, std::uint64_t limit) {
    if (w >= limit) return std::nullopt;
    return static_cast<std::uint64_t>(w);
}

InstructionStream::InstructionStream(std::vector<Instruction> code, Bytes executable, Bytes trailer)
    : code_(std::move(code)), bytes_(std::move(executable)), trailer_(std::move(trailer)),
      owner_(bytes_.size(), 0) {
    for (std::uint32_t i = 0; i < code_.size(); ++i)
        for (std::size_t b = code_[i].offset; b < code_[i].end(); ++b) owner_[b] = i;
}

std::size_t InstructionStream::owning_index(std::size_t offset) const noexcept {
    if (offset >= owner_.size()) return npos;
    return owner_[offset];
}

std::size_t InstructionStream::index_at(std::size_t offset) const noexcept {
    const auto i = owning_index(offset);
    if (i == npos || code_[i].offset != offset) return npos;
    return i;
}

const Instruction* InstructionStream::at(std::size_t offset) const noexcept {
    const auto i = index_at(offset);
    return i == npos ? nullptr : &code_[i];
}

bool InstructionStream::is_jumpdest(std::size_t offset) const noexcept {
    const auto* ins = at(offset);
    return ins != nullptr && ins->op() == Op::JUMPDEST;
}

namespace {

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::vector<Instruction> sweep(std::span<const std::uint8_t> bytes) {
    std::vector<Instruction> out;
    std::size_t pc = 0;
    while (pc < bytes.size()) {
        Instruction ins;
        ins.offset = pc;
        ins.opcode = bytes[pc];
        const unsigned want = push_size(ins.opcode);
        const std::size_t have = std::min<std::size_t>(want, bytes.size() - pc - 1);
        Word value = 0;
        for (unsigned k = 0; k < want; ++k) {
            value <<= 8;
            if (k < have) value |= bytes[pc + 1 + k];
        }
        ins.immediate = value;
        ins.immediate_len = static_cast<std::uint8_t>(have);
        ins.truncated = have < want;
        out.push_back(ins);
        pc += 1 + have;
    }
    return out;
}

}  // namespace

Bytes parse_hex(std::string_view text) {
    std::string digits;
    digits.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) digits.push_back(c);
    std::string_view d = digits;
    if (d.size() >= 2 && d[0] == '0' && (d[1] == 'x' || d[1] == 'X')) d.remove_prefix(2);
    if (d.size() % 2 != 0) throw MalformedHex("odd number of hex digits");
    Bytes out;
    out.reserve(d.size() / 2);
    for (std::size_t i = 0; i < d.size(); i += 2) {
        const int hi = hex_digit(d[i]);
        const int lo = hex_digit(d[i + 1]);
        if (hi < 0 || lo < 0)
            throw MalformedHex("non-hex character near position " + std::to_string(i));
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes, bool prefix) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s = prefix ? "0x" : "";
    s.reserve(s.size() + bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

InstructionStream decode(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw EmptyInput();
    return InstructionStream(sweep(bytes), Bytes(bytes.begin(), bytes.end()), {});
}

InstructionStream decode_hex(std::string_view text) { return decode(parse_hex(text)); }

InstructionStream strip_trailer(const InstructionStream& stream) {
    const Bytes& b = stream.bytes();
    if (!stream.trailer().empty() || b.size() < 3) return stream;
    const std::size_t declared = static_cast<std::size_t>(b[b.size() - 2]) << 8 | b.back();
    if (declared == 0 || declared + 2 >= b.size()) return stream;
    const std::size_t start = b.size() - 2 - declared;
    // CBOR map header with 1..23 entries.
    if (b[start] < 0xa1 || b[start] > 0xb7) return stream;
    Bytes exec(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(start));
    Bytes trailer(b.begin() + static_cast<std::ptrdiff_t>(start), b.end());
    auto code = sweep(exec);
    return InstructionStream(std::move(code), std::move(exec), std::move(trailer));
}

Bytes serialize(const InstructionStream& stream) {
    Bytes out;
    out.reserve(stream.code_len() + stream.trailer().size());
    for (const auto& ins : stream.code()) {
        out.push_back(ins.opcode);
        const unsigned declared = push_size(ins.opcode);
        for (unsigned k = 0; k < ins.immediate_len; ++k) {
            const unsigned shift = 8 * (declared - 1 - k);
            out.push_back(static_cast<std::uint8_t>((ins.immediate >> shift) & 0xff));
        }
    }
    out.insert(out.end(), stream.trailer().begin(), stream.trailer().end());
    return out;
}

Bytes read_bytecode_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    Bytes raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const auto ext = path.extension().string();
    bool as_text = ext == ".hex";
    if (ext != ".hex" && ext != ".bin") {
        as_text = !raw.empty() && std::all_of(raw.begin(), raw.end(), [](std::uint8_t c) {
            return std::isxdigit(c) || std::isspace(c) || c == 'x' || c == 'X';
        });
    }
    if (!as_text) {
        if (raw.empty()) throw EmptyInput();
        return raw;
    }
    auto bytes = parse_hex(std::string_view(reinterpret_cast<const char*>(raw.data()), raw.size()));
    if (bytes.empty()) throw EmptyInput();
    return bytes;
}

std::string format_instruction(const Instruction& ins) {
    std::ostringstream os;
    os << std::hex << "0x" << ins.offset << ' ' << mnemonic(ins.opcode);
    if (push_size(ins.opcode) > 0) os << " 0x" << ins.immediate;
    if (ins.truncated) os << " (truncated)";
    return os.str();
}

}  // namespace smvscan
