#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framp/nn.hpp"

namespace framp::mask {

using Vec = std::vector<double>;

struct Mask {
    Vec bits;      // 0.0 or 1.0, length d
    double gamma = 1.0;

    size_t cardinality() const;
};

/// Keeps the floor(gamma*d) largest-|value| entries; ties go to the lower flat index.
Mask global_topk(const Vec& params, double gamma);

/// TopK applied independently inside each layer block.
Mask layerwise_topk(const Vec& params, const nn::ModelSpec& spec, double gamma);

/// First floor(gamma*d_l) indices of each layer block, value- and round-independent.
Mask static_prefix(const nn::ModelSpec& spec, double gamma);

/// Per-block circular window of floor(gamma*d_l) indices advancing by one window per round.
Mask rolling(const nn::ModelSpec& spec, double gamma, uint64_t round);

// Compact bitset file for the coverage analyzer: header (magic, d), then one
// record per mask: round u32, client u32, packed bits.
struct MaskRecord {
    uint32_t round = 0;
    uint32_t client = 0;
    std::vector<uint8_t> packed;
};

class MaskWriter {
public:
    MaskWriter(const std::string& path, size_t d);
    void append(uint32_t round, uint32_t client, const Mask& m);
    void close();
    ~MaskWriter();

private:
    struct Impl;
    Impl* impl_;
};

std::vector<MaskRecord> read_mask_file(const std::string& path, size_t& d_out);
Vec unpack_bits(const std::vector<uint8_t>& packed, size_t d);

}  // namespace framp::mask
