#include "doctest.h"

#include "fixture_util.hpp"
#include "smvscan/error.hpp"
#include "smvscan/model.hpp"

using namespace smvscan;

namespace {

ModelHeader small() {
    ModelHeader h;
    h.hidden_dim = 8;
    h.layer_count = 1;
    h.head_count = 2;
    h.ffn_dim = 16;
    h.max_seq_len = 32;
    return h;
}

std::string header_text(const ModelHeader& h) {
    std::string s = "vocab_size=" + std::to_string(h.vocab_size) + "\nhidden_dim=" + std::to_string(h.hidden_dim) +
                    "\nlayer_count=" + std::to_string(h.layer_count) + "\nhead_count=" + std::to_string(h.head_count) +
                    "\nffn_dim=" + std::to_string(h.ffn_dim) + "\nmax_seq_len=" + std::to_string(h.max_seq_len) + "\n";
    for (const auto& [k, v] : h.extra) s += k + "=" + v + "\n";
    return s;
}

}  // namespace

TEST_CASE("fnv1a64 reference values") {
    CHECK(fnv1a64({}) == 0xcbf29ce484222325ull);
    const std::uint8_t a[] = {'a'};
    CHECK(fnv1a64(a) == 0xaf63dc4c8601ec8cull);
    const std::uint8_t foobar[] = {'f', 'o', 'o', 'b', 'a', 'r'};
    CHECK(fnv1a64(foobar) == 0x85944171f73967e8ull);
}

TEST_CASE("weight files round-trip") {
    auto h = small();
    h.extra["seed"] = "7";
    const auto w = ModelWeights::random(h, 7);
    const auto bytes = w.serialize();
    const auto back = ModelWeights::parse(bytes);
    CHECK(back.header == w.header);
    CHECK(back.tensors == w.tensors);
    CHECK(back.serialize() == bytes);

    std::size_t tensor_bytes = 0;
    for (const auto& [name, dims] : ModelWeights::layout(h)) {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        tensor_bytes += 4 + name.size() + 4 + 4 * dims.size() + 4 * n;
    }
    CHECK(bytes.size() == 4 + 2 + 4 + header_text(h).size() + tensor_bytes + 8);

    CHECK(ModelWeights::random(h, 7).serialize() == bytes);
    CHECK(ModelWeights::random(h, 8).serialize() != bytes);
}

TEST_CASE("corrupt weight files are rejected") {
    const auto bytes = ModelWeights::random(small(), 1).serialize();
    for (std::size_t pos : {bytes.size() - 20, bytes.size() / 2, bytes.size() - 1}) {
        auto bad = bytes;
        bad[pos] ^= 0x40;
        CHECK_THROWS_AS(ModelWeights::parse(bad), ChecksumMismatch);
    }
    auto magic = bytes;
    magic[0] = 'X';
    CHECK_THROWS_AS(ModelWeights::parse(magic), Error);
    auto version = bytes;
    version[4] = 2;
    CHECK_THROWS_AS(ModelWeights::parse(version), Error);
    CHECK_THROWS_AS(ModelWeights::parse(Bytes(bytes.begin(), bytes.begin() + 12)), Error);
    CHECK_THROWS_AS(ModelWeights::load("/nonexistent/model.smvw"), IoFailure);
}

TEST_CASE("shape checks") {
    auto w = ModelWeights::random(small(), 2);
    CHECK_NOTHROW(w.validate());

    auto missing = w;
    missing.tensors.erase("head.bias");
    CHECK_THROWS_AS(missing.validate(), ShapeMismatch);
    CHECK_THROWS_AS(ModelWeights::parse(missing.serialize()), ShapeMismatch);

    auto reshaped = w;
    reshaped.tensors["layer0.ffn.in.weight"].dims = {16, 8};
    CHECK_THROWS_AS(ModelWeights::parse(reshaped.serialize()), ShapeMismatch);

    auto heads = w;
    heads.header.head_count = 3;
    CHECK_THROWS_AS(heads.validate(), ShapeMismatch);

    CHECK_THROWS_AS(forward(w, std::vector<std::uint16_t>(33, kPad)), ShapeMismatch);
    CHECK_THROWS_AS(forward(w, {static_cast<std::uint16_t>(kVocabSize)}), ShapeMismatch);
}

TEST_CASE("forward is deterministic and masks padding") {
    const auto w = ModelWeights::random(small(), 3);
    std::vector<std::uint16_t> t = {0x65, 0x06, 0x15, kPad, kPad};
    const auto a = forward(w, t);
    CHECK(a.size() == t.size());
    CHECK(forward(w, t) == a);
    // real positions ignore what the padded slots contain
    auto other = forward(w, {0x65, 0x06, 0x15, kPad});
    for (std::size_t i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) CHECK(other[i][c] == doctest::Approx(a[i][c]).epsilon(1e-5));
    for (const auto& l : forward(w, std::vector<std::uint16_t>(4, kPad)))
        for (float f : l) CHECK(std::isfinite(f));
}

TEST_CASE("model labels cover every instruction") {
    const auto w = ModelWeights::random(small(), 4);
    const auto stream = strip_trailer(decode(read_bytecode_file(testing::contracts_dir() / "token_hub.hex")));
    const auto one = recover_model(stream, w, {16, 1});
    const auto many = recover_model(stream, w, {16, 4});
    REQUIRE(one.size() == stream.code().size());
    for (std::size_t i = 0; i < one.size(); ++i) {
        CHECK(one[i].offset == stream.code()[i].offset);
        CHECK(one[i].source == LabelSource::Model);
        CHECK(one[i].label == many[i].label);
        CHECK(one[i].confidence == many[i].confidence);
    }
    for (const auto& r : pair_labels(one, stream.code_len())) CHECK(r.start < r.end);
}
