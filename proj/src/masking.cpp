#include "framp/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace framp::mask {

namespace {

void check_gamma(double gamma) {
    if (!(gamma > 0.0) || gamma > 1.0)
        throw std::invalid_argument("gamma must be in (0, 1]");
}

size_t budget(double gamma, size_t n) {
    if (gamma == 1.0) return n;
    return static_cast<size_t>(std::floor(gamma * static_cast<double>(n)));
}

// Select the top-k |values| inside [begin, begin+n); ties to the lower index.
void select_topk(const Vec& params, size_t begin, size_t n, size_t k, Vec& bits) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), begin);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
        double ma = std::fabs(params[a]), mb = std::fabs(params[b]);
        if (ma != mb) return ma > mb;
        return a < b;
    });
    for (size_t i = 0; i < k; ++i) bits[idx[i]] = 1.0;
}

}  // namespace

size_t Mask::cardinality() const {
    size_t n = 0;
    for (double b : bits) n += (b != 0.0);
    return n;
}

Mask global_topk(const Vec& params, double gamma) {
    check_gamma(gamma);
    Mask m;
    m.gamma = gamma;
    m.bits.assign(params.size(), 0.0);
    select_topk(params, 0, params.size(), budget(gamma, params.size()), m.bits);
    return m;
}

Mask layerwise_topk(const Vec& params, const nn::ModelSpec& spec, double gamma) {
    check_gamma(gamma);
    if (params.size() != spec.param_count())
        throw std::invalid_argument("params length != spec param count");
    Mask m;
    m.gamma = gamma;
    m.bits.assign(params.size(), 0.0);
    for (size_t l = 0; l < spec.num_layers(); ++l) {
        size_t n = spec.layer_param_count(l);
        select_topk(params, spec.layer_offset(l), n, budget(gamma, n), m.bits);
    }
    return m;
}

Mask static_prefix(const nn::ModelSpec& spec, double gamma) {
    check_gamma(gamma);
    Mask m;
    m.gamma = gamma;
    m.bits.assign(spec.param_count(), 0.0);
    for (size_t l = 0; l < spec.num_layers(); ++l) {
        size_t off = spec.layer_offset(l);
        size_t k = budget(gamma, spec.layer_param_count(l));
        for (size_t i = 0; i < k; ++i) m.bits[off + i] = 1.0;
    }
    return m;
}

Mask rolling(const nn::ModelSpec& spec, double gamma, uint64_t round) {
    check_gamma(gamma);
    Mask m;
    m.gamma = gamma;
    m.bits.assign(spec.param_count(), 0.0);
    for (size_t l = 0; l < spec.num_layers(); ++l) {
        size_t off = spec.layer_offset(l);
        size_t n = spec.layer_param_count(l);
        size_t k = budget(gamma, n);
        if (k == 0) continue;
        size_t start = (round * k) % n;
        for (size_t i = 0; i < k; ++i) m.bits[off + (start + i) % n] = 1.0;
    }
    return m;
}

namespace {
constexpr uint32_t kMagic = 0x4d534b31;   // "MSK1"
}

struct MaskWriter::Impl {
    std::ofstream out;
    size_t d = 0;
};

MaskWriter::MaskWriter(const std::string& path, size_t d) : impl_(new Impl) {
    impl_->d = d;
    impl_->out.open(path, std::ios::binary | std::ios::trunc);
    if (!impl_->out) throw std::runtime_error("cannot open mask file: " + path);
    uint32_t magic = kMagic;
    uint64_t dim = d;
    impl_->out.write(reinterpret_cast<const char*>(&magic), sizeof magic);
    impl_->out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
}

void MaskWriter::append(uint32_t round, uint32_t client, const Mask& m) {
    if (m.bits.size() != impl_->d) throw std::invalid_argument("mask length mismatch");
    impl_->out.write(reinterpret_cast<const char*>(&round), sizeof round);
    impl_->out.write(reinterpret_cast<const char*>(&client), sizeof client);
    std::vector<uint8_t> packed((impl_->d + 7) / 8, 0);
    for (size_t i = 0; i < impl_->d; ++i)
        if (m.bits[i] != 0.0) packed[i / 8] |= static_cast<uint8_t>(1u << (i % 8));
    impl_->out.write(reinterpret_cast<const char*>(packed.data()),
                     static_cast<std::streamsize>(packed.size()));
}

void MaskWriter::close() {
    if (impl_ && impl_->out.is_open()) impl_->out.close();
}

MaskWriter::~MaskWriter() {
    close();
    delete impl_;
}

std::vector<MaskRecord> read_mask_file(const std::string& path, size_t& d_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open mask file: " + path);
    uint32_t magic = 0;
    uint64_t dim = 0;
    in.read(reinterpret_cast<char*>(&magic), sizeof magic);
    in.read(reinterpret_cast<char*>(&dim), sizeof dim);
    if (magic != kMagic) throw std::runtime_error("bad mask file magic");
    d_out = dim;
    size_t bytes = (dim + 7) / 8;
    std::vector<MaskRecord> records;
    for (;;) {
        MaskRecord rec;
        in.read(reinterpret_cast<char*>(&rec.round), sizeof rec.round);
        if (!in) break;
        in.read(reinterpret_cast<char*>(&rec.client), sizeof rec.client);
        rec.packed.resize(bytes);
        in.read(reinterpret_cast<char*>(rec.packed.data()),
                static_cast<std::streamsize>(bytes));
        if (!in) throw std::runtime_error("truncated mask file");
        records.push_back(std::move(rec));
    }
    return records;
}

Vec unpack_bits(const std::vector<uint8_t>& packed, size_t d) {
    Vec bits(d, 0.0);
    for (size_t i = 0; i < d; ++i)
        bits[i] = (packed[i / 8] >> (i % 8)) & 1u ? 1.0 : 0.0;
    return bits;
}

}  // namespace framp::mask
