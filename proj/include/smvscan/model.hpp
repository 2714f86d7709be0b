#pragma once

// Learned boundary labeler: a small post-LN transformer encoder over byte
// tokens with a 3-way S/E/N head, loaded from an SMVW weight file.
//
// SMVW layout (little endian):
//   "SMVW" | u16 version=1 | u32 header_len | header_len bytes of "key=value\n"
//   tensors until 8 bytes remain, each:
//     u32 name_len | name | u32 rank | u32 dims[rank] | f32 data[prod(dims)]
//   u64 FNV-1a over the tensor section
//
// Tensor names (H hidden, F ffn, V vocab, L max_seq_len), linear layers are y = xW + b:
//   embed.token [V,H]  embed.position [L,H]  embed.ln.gamma/beta [H]
//   layer{i}.attn.{q,k,v,o}.weight [H,H]  .bias [H]
//   layer{i}.ln1.gamma/beta [H]
//   layer{i}.ffn.in.weight [H,F]  .bias [F]   layer{i}.ffn.out.weight [F,H]  .bias [H]
//   layer{i}.ln2.gamma/beta [H]
//   head.weight [H,3]  head.bias [3]          (logit order S, E, N)

#include "smvscan/boundary.hpp"
#include "smvscan/bytecode.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace smvscan {

struct ModelHeader {
    std::uint32_t vocab_size = kVocabSize;
    std::uint32_t hidden_dim = 64;
    std::uint32_t layer_count = 2;
    std::uint32_t head_count = 4;
    std::uint32_t ffn_dim = 256;
    std::uint32_t max_seq_len = 512;
    /// Keys other than the six above, kept verbatim.
    std::map<std::string, std::string> extra;

    bool operator==(const ModelHeader&) const = default;
};

struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    std::size_t size() const noexcept;
    bool operator==(const Tensor&) const = default;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;

class ModelWeights {
public:
    ModelHeader header;
    std::map<std::string, Tensor> tensors;

    /// Parses and checksum-verifies; throws ChecksumMismatch, ShapeMismatch or Error.
    static ModelWeights parse(std::span<const std::uint8_t> bytes);
    static ModelWeights load(const std::filesystem::path& path);
    Bytes serialize() const;
    void save(const std::filesystem::path& path) const;

    /// Throws ShapeMismatch unless every expected tensor is present with the
    /// shape implied by the header.
    void validate() const;
    const Tensor& at(const std::string& name) const;

    /// Expected tensor names and shapes for `h`.
    static std::vector<std::pair<std::string, std::vector<std::uint32_t>>> layout(const ModelHeader& h);
    /// Untrained weights with small seeded normal values, for plumbing tests.
    static ModelWeights random(const ModelHeader& h, std::uint64_t seed);
};

using Logits = std::array<float, 3>;

/// Per-position logits for one padded token window. Padded keys are masked
/// from attention unless the window holds no real token at all.
std::vector<Logits> forward(const ModelWeights& w, const std::vector<std::uint16_t>& tokens);

struct ModelOptions {
    std::size_t stride = 256;
    std::size_t jobs = 1;
};

/// Sliding-window inference; one label per instruction start.
std::vector<BoundaryLabel> recover_model(const InstructionStream& stream, const ModelWeights& w,
                                         const ModelOptions& options = {});

}  // namespace smvscan
