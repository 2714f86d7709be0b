// Writes a seeded weight file plus the engine's logits for a token window,
// for comparison against an independent reference implementation.
//
//   model_dump OUT.smvw OUT.tsv

#include "smvscan/model.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace smvscan;

int main(int argc, char** argv) {
    if (argc != 3) {
        std::cerr << "usage: model_dump OUT.smvw OUT.tsv\n";
        return 1;
    }
    ModelHeader h;
    h.hidden_dim = 16;
    h.layer_count = 2;
    h.head_count = 4;
    h.ffn_dim = 32;
    h.max_seq_len = 48;
    const auto w = ModelWeights::random(h, 20240611);
    w.save(argv[1]);

    const Bytes code = {0x60, 0x80, 0x60, 0x40, 0x52, 0x34, 0x80, 0x15, 0x61, 0x00, 0x10, 0x57,
                        0x5b, 0x60, 0x00, 0x35, 0x60, 0xe0, 0x1c, 0x80, 0x63, 0xa9, 0x05, 0x9c,
                        0xbb, 0x14, 0x61, 0x00, 0x30, 0x57, 0x5b, 0x00, 0xfd, 0xf3};
    const auto tokens = tokenize(decode(code), 0, code.size(), h.max_seq_len);
    const auto logits = forward(w, tokens);

    std::ofstream out(argv[2]);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        char line[128];
        std::snprintf(line, sizeof line, "%u\t%.9g\t%.9g\t%.9g\n", tokens[i], logits[i][0], logits[i][1], logits[i][2]);
        out << line;
    }
    return out ? 0 : 1;
}
