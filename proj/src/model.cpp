#include "smvscan/model.hpp"

#include "smvscan/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

namespace smvscan {

std::size_t Tensor::size() const noexcept {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return dims.empty() ? 0 : n;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

constexpr std::uint16_t kVersion = 1;

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

    std::size_t pos() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return b_.size() - pos_; }

    void need(std::size_t n) const {
        if (remaining() < n) throw Error("weight file truncated at byte " + std::to_string(pos_));
    }
    template <class T>
    T get() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b_[pos_ + i]) << (8 * i));
        pos_ += sizeof(T);
        return v;
    }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    float f32() {
        const auto u = get<std::uint32_t>();
        float f;
        std::memcpy(&f, &u, sizeof f);
        return f;
    }

private:
    std::span<const std::uint8_t> b_;
    std::size_t pos_ = 0;
};

template <class T>
void put(Bytes& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(Bytes& out, float f) {
    std::uint32_t u;
    std::memcpy(&u, &f, sizeof u);
    put(out, u);
}

std::uint32_t parse_u32(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const auto n = std::stoul(v, &used);
        if (used != v.size() || n == 0 || n > 0xffffffffu) throw std::invalid_argument(v);
        return static_cast<std::uint32_t>(n);
    } catch (const std::exception&) {
        throw Error("weight header: bad value for " + key + ": '" + v + "'");
    }
}

}  // namespace

std::vector<std::pair<std::string, std::vector<std::uint32_t>>> ModelWeights::layout(const ModelHeader& h) {
    const auto H = h.hidden_dim, F = h.ffn_dim;
    std::vector<std::pair<std::string, std::vector<std::uint32_t>>> out{
        {"embed.token", {h.vocab_size, H}},
        {"embed.position", {h.max_seq_len, H}},
        {"embed.ln.gamma", {H}},
        {"embed.ln.beta", {H}},
    };
    for (std::uint32_t i = 0; i < h.layer_count; ++i) {
        const auto p = "layer" + std::to_string(i) + ".";
        for (const char* m : {"q", "k", "v", "o"}) {
            out.push_back({p + "attn." + m + ".weight", {H, H}});
            out.push_back({p + "attn." + m + ".bias", {H}});
        }
        out.push_back({p + "ln1.gamma", {H}});
        out.push_back({p + "ln1.beta", {H}});
        out.push_back({p + "ffn.in.weight", {H, F}});
        out.push_back({p + "ffn.in.bias", {F}});
        out.push_back({p + "ffn.out.weight", {F, H}});
        out.push_back({p + "ffn.out.bias", {H}});
        out.push_back({p + "ln2.gamma", {H}});
        out.push_back({p + "ln2.beta", {H}});
    }
    out.push_back({"head.weight", {H, 3}});
    out.push_back({"head.bias", {3}});
    return out;
}

void ModelWeights::validate() const {
    if (header.head_count == 0 || header.hidden_dim % header.head_count != 0)
        throw ShapeMismatch("hidden_dim " + std::to_string(header.hidden_dim) + " not divisible by head_count " +
                            std::to_string(header.head_count));
    if (header.vocab_size < kVocabSize)
        throw ShapeMismatch("vocab_size " + std::to_string(header.vocab_size) + " below " + std::to_string(kVocabSize));
    for (const auto& [name, dims] : layout(header)) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw ShapeMismatch("missing tensor " + name);
        if (it->second.dims != dims) {
            std::string want, got;
            for (auto d : dims) want += (want.empty() ? "" : "x") + std::to_string(d);
            for (auto d : it->second.dims) got += (got.empty() ? "" : "x") + std::to_string(d);
            throw ShapeMismatch("tensor " + name + " has shape " + got + ", header implies " + want);
        }
    }
}

const Tensor& ModelWeights::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw ShapeMismatch("missing tensor " + name);
    return it->second;
}

ModelWeights ModelWeights::parse(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    if (r.str(4) != "SMVW") throw Error("not an SMVW weight file");
    if (const auto v = r.get<std::uint16_t>(); v != kVersion)
        throw Error("unsupported SMVW version " + std::to_string(v));
    const auto header_len = r.get<std::uint32_t>();
    const auto text = r.str(header_len);

    ModelWeights w;
    std::istringstream lines(text);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw Error("weight header line without '=': " + line);
        const auto key = line.substr(0, eq), value = line.substr(eq + 1);
        auto& h = w.header;
        if (key == "vocab_size") h.vocab_size = parse_u32(key, value);
        else if (key == "hidden_dim") h.hidden_dim = parse_u32(key, value);
        else if (key == "layer_count") h.layer_count = parse_u32(key, value);
        else if (key == "head_count") h.head_count = parse_u32(key, value);
        else if (key == "ffn_dim") h.ffn_dim = parse_u32(key, value);
        else if (key == "max_seq_len") h.max_seq_len = parse_u32(key, value);
        else h.extra[key] = value;
    }

    if (r.remaining() < 8) throw Error("weight file truncated before checksum");
    const std::size_t section_begin = r.pos();
    const std::size_t section_end = bytes.size() - 8;
    const auto expected = fnv1a64(bytes.subspan(section_begin, section_end - section_begin));
    Reader tail(bytes.subspan(section_end));
    if (tail.get<std::uint64_t>() != expected) throw ChecksumMismatch("weight file checksum mismatch");

    while (r.pos() < section_end) {
        const auto name = r.str(r.get<std::uint32_t>());
        Tensor t;
        const auto rank = r.get<std::uint32_t>();
        if (rank == 0 || rank > 4) throw ShapeMismatch("tensor " + name + " has rank " + std::to_string(rank));
        for (std::uint32_t i = 0; i < rank; ++i) t.dims.push_back(r.get<std::uint32_t>());
        const auto n = t.size();
        if (n * 4 > section_end - r.pos()) throw ShapeMismatch("tensor " + name + " extends past the tensor section");
        t.data.resize(n);
        for (auto& f : t.data) f = r.f32();
        if (!w.tensors.emplace(name, std::move(t)).second) throw ShapeMismatch("duplicate tensor " + name);
    }
    if (r.pos() != section_end) throw ShapeMismatch("tensor section overruns checksum");
    w.validate();
    return w;
}

ModelWeights ModelWeights::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open model file " + path.string());
    Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(b);
}

Bytes ModelWeights::serialize() const {
    std::ostringstream hs;
    hs << "vocab_size=" << header.vocab_size << "\nhidden_dim=" << header.hidden_dim
       << "\nlayer_count=" << header.layer_count << "\nhead_count=" << header.head_count
       << "\nffn_dim=" << header.ffn_dim << "\nmax_seq_len=" << header.max_seq_len << '\n';
    for (const auto& [k, v] : header.extra) hs << k << '=' << v << '\n';
    const auto text = hs.str();

    Bytes out{'S', 'M', 'V', 'W'};
    put<std::uint16_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
    out.insert(out.end(), text.begin(), text.end());
    const std::size_t section = out.size();
    for (const auto& [name, t] : tensors) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.dims.size()));
        for (auto d : t.dims) put<std::uint32_t>(out, d);
        for (auto f : t.data) put_f32(out, f);
    }
    put<std::uint64_t>(out, fnv1a64(std::span<const std::uint8_t>(out).subspan(section)));
    return out;
}

void ModelWeights::save(const std::filesystem::path& path) const {
    const auto b = serialize();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write model file " + path.string());
    out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    if (!out) throw IoFailure("short write to " + path.string());
}

ModelWeights ModelWeights::random(const ModelHeader& h, std::uint64_t seed) {
    ModelWeights w;
    w.header = h;
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 0.1f);
    for (const auto& [name, dims] : layout(h)) {
        Tensor t{dims, {}};
        t.data.resize(t.size());
        const bool gamma = name.ends_with(".gamma");
        for (auto& f : t.data) f = gamma ? 1.0f + normal(rng) : normal(rng);
        w.tensors.emplace(name, std::move(t));
    }
    return w;
}

// ---------------------------------------------------------------------------

namespace {

using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::RowVectorXf;

Eigen::Map<const Mat> mat(const Tensor& t) {
    return {t.data.data(), static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1])};
}
Eigen::Map<const Vec> vec(const Tensor& t) { return {t.data.data(), static_cast<Eigen::Index>(t.dims[0])}; }

void layer_norm(Mat& x, const Tensor& gamma, const Tensor& beta) {
    const auto g = vec(gamma);
    const auto b = vec(beta);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        const float mean = row.mean();
        const float var = (row.array() - mean).square().mean();
        row = ((row.array() - mean) / std::sqrt(var + 1e-5f)).matrix();
        row = (row.array() * g.array() + b.array()).matrix();
    }
}

Mat linear(const Mat& x, const ModelWeights& w, const std::string& prefix) {
    Mat y = x * mat(w.at(prefix + ".weight"));
    y.rowwise() += vec(w.at(prefix + ".bias"));
    return y;
}

}  // namespace

std::vector<Logits> forward(const ModelWeights& w, const std::vector<std::uint16_t>& tokens) {
    const auto& h = w.header;
    const auto L = static_cast<Eigen::Index>(tokens.size());
    if (tokens.size() > h.max_seq_len)
        throw ShapeMismatch("token window of " + std::to_string(tokens.size()) + " exceeds max_seq_len");
    const auto H = static_cast<Eigen::Index>(h.hidden_dim);
    const auto heads = static_cast<Eigen::Index>(h.head_count);
    const auto dh = H / heads;

    const auto tok = mat(w.at("embed.token"));
    const auto pos = mat(w.at("embed.position"));
    Mat x(L, H);
    bool any_real = false;
    for (Eigen::Index i = 0; i < L; ++i) {
        if (tokens[i] >= h.vocab_size) throw ShapeMismatch("token id " + std::to_string(tokens[i]) + " outside vocabulary");
        x.row(i) = tok.row(tokens[i]) + pos.row(i);
        any_real |= tokens[i] != kPad;
    }
    layer_norm(x, w.at("embed.ln.gamma"), w.at("embed.ln.beta"));

    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
    for (std::uint32_t layer = 0; layer < h.layer_count; ++layer) {
        const auto p = "layer" + std::to_string(layer) + ".";
        const Mat q = linear(x, w, p + "attn.q");
        const Mat k = linear(x, w, p + "attn.k");
        const Mat v = linear(x, w, p + "attn.v");
        Mat ctx(L, H);
        for (Eigen::Index hd = 0; hd < heads; ++hd) {
            Mat s = q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose() * scale;
            if (any_real)
                for (Eigen::Index j = 0; j < L; ++j)
                    if (tokens[j] == kPad) s.col(j).setConstant(-std::numeric_limits<float>::infinity());
            for (Eigen::Index i = 0; i < L; ++i) {
                auto row = s.row(i);
                const float m = row.maxCoeff();
                row = (row.array() - m).exp().matrix();
                row /= row.sum();
            }
            ctx.middleCols(hd * dh, dh) = s * v.middleCols(hd * dh, dh);
        }
        x += linear(ctx, w, p + "attn.o");
        layer_norm(x, w.at(p + "ln1.gamma"), w.at(p + "ln1.beta"));
        Mat f = linear(x, w, p + "ffn.in");
        f = f.unaryExpr([](float a) { return 0.5f * a * (1.0f + std::erf(a / std::sqrt(2.0f))); });
        x += linear(f, w, p + "ffn.out");
        layer_norm(x, w.at(p + "ln2.gamma"), w.at(p + "ln2.beta"));
    }
    const Mat logits = linear(x, w, "head");
    std::vector<Logits> out(static_cast<std::size_t>(L));
    for (Eigen::Index i = 0; i < L; ++i)
        for (int c = 0; c < 3; ++c) out[static_cast<std::size_t>(i)][c] = logits(i, c);
    return out;
}

namespace {

struct BytePrediction {
    Label label = Label::N;
    float confidence = -1.0f;
};

std::vector<BytePrediction> predict_window(const InstructionStream& s, const ModelWeights& w, std::size_t begin,
                                           std::size_t end) {
    const auto logits = forward(w, tokenize(s, begin, end, w.header.max_seq_len));
    std::vector<BytePrediction> out(end - begin);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& l = logits[i];
        const float m = *std::max_element(l.begin(), l.end());
        std::array<float, 3> p;
        float sum = 0;
        for (int c = 0; c < 3; ++c) sum += p[c] = std::exp(l[c] - m);
        const int best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        out[i] = {static_cast<Label>(best), p[best] / sum};
    }
    return out;
}

}  // namespace

std::vector<BoundaryLabel> recover_model(const InstructionStream& stream, const ModelWeights& w,
                                         const ModelOptions& options) {
    w.validate();
    const std::size_t n = stream.code_len();
    const std::size_t window = w.header.max_seq_len;
    const std::size_t stride = std::clamp<std::size_t>(options.stride, 1, window);
    std::vector<std::size_t> starts;
    for (std::size_t b = 0;; b += stride) {
        starts.push_back(b);
        if (b + window >= n) break;
    }

    std::vector<std::vector<BytePrediction>> results(starts.size());
    const std::size_t jobs = std::max<std::size_t>(1, options.jobs);
    for (std::size_t base = 0; base < starts.size(); base += jobs) {
        std::vector<std::future<std::vector<BytePrediction>>> pending;
        for (std::size_t k = base; k < std::min(starts.size(), base + jobs); ++k) {
            const auto b = starts[k];
            pending.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                         [&, b] { return predict_window(stream, w, b, std::min(n, b + window)); }));
        }
        for (std::size_t k = 0; k < pending.size(); ++k) results[base + k] = pending[k].get();
    }

    std::vector<BytePrediction> best(n);
    for (std::size_t k = 0; k < starts.size(); ++k)
        for (std::size_t i = 0; i < results[k].size(); ++i) {
            auto& cur = best[starts[k] + i];
            if (results[k][i].confidence > cur.confidence) cur = results[k][i];
        }

    // Snap byte labels to instruction starts: a boundary predicted anywhere
    // inside an instruction's encoding belongs to that instruction.
    std::vector<BoundaryLabel> out;
    out.reserve(stream.code().size());
    for (const auto& ins : stream.code()) {
        BoundaryLabel l{ins.offset, Label::N, 0.0f, LabelSource::Model};
        float boundary_conf = -1.0f;
        for (std::size_t b = ins.offset; b < std::min(n, ins.end()); ++b) {
            const auto& p = best[b];
            if (p.label != Label::N && p.confidence > boundary_conf) {
                boundary_conf = p.confidence;
                l.label = p.label;
                l.confidence = p.confidence;
            } else if (boundary_conf < 0 && p.label == Label::N) {
                l.confidence = std::max(l.confidence, p.confidence);
            }
        }
        out.push_back(l);
    }
    return out;
}

}  // namespace smvscan
