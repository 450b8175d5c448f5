#include "framp/prototypes.hpp"

#include <cmath>
#include <stdexcept>

#include "framp/nn.hpp"
#include "framp/rng.hpp"

namespace framp::proto {

bool PrototypeSet::any_present() const {
    for (bool p : present)
        if (p) return true;
    return false;
}

PrototypeSet local_prototypes(const nn::ModelSpec& spec, const Vec& params,
                              const Vec& mask, const nn::Batch& dataset) {
    if (dataset.size() == 0) throw std::invalid_argument("empty dataset");
    size_t C = spec.num_classes();
    size_t h = spec.encoder_dim();
    PrototypeSet out(C, h);
    std::vector<size_t> counts(C, 0);
    for (size_t i = 0; i < dataset.size(); ++i) {
        auto fr = nn::forward(spec, params, mask, dataset.inputs[i]);
        int y = dataset.labels[i];
        ++counts[y];
        for (size_t j = 0; j < h; ++j) out.vectors[y][j] += fr.hidden[j];
    }
    for (size_t c = 0; c < C; ++c) {
        if (counts[c] == 0) continue;
        out.present[c] = true;
        for (size_t j = 0; j < h; ++j) out.vectors[c][j] /= static_cast<double>(counts[c]);
    }
    return out;
}

PrototypeSet aggregate_global(const std::vector<PrototypeSet>& locals,
                              const PrototypeSet& previous) {
    PrototypeSet out = previous;
    for (const auto& s : locals) {
        if (s.num_classes != previous.num_classes || s.dim != previous.dim)
            throw std::invalid_argument("prototype set shape mismatch");
    }
    for (size_t c = 0; c < previous.num_classes; ++c) {
        Vec sum(previous.dim, 0.0);
        size_t holders = 0;
        for (const auto& s : locals) {
            if (!s.present[c]) continue;
            ++holders;
            for (size_t j = 0; j < previous.dim; ++j) sum[j] += s.vectors[c][j];
        }
        if (holders == 0) continue;   // carry previous entry forward
        out.present[c] = true;
        for (size_t j = 0; j < previous.dim; ++j)
            out.vectors[c][j] = sum[j] / static_cast<double>(holders);
    }
    return out;
}

double alignment_loss(const PrototypeSet& local, const PrototypeSet& global) {
    if (local.num_classes != global.num_classes || local.dim != global.dim)
        throw std::invalid_argument("prototype set shape mismatch");
    double total = 0.0;
    for (size_t c = 0; c < local.num_classes; ++c) {
        if (!local.present[c] || !global.present[c]) continue;
        for (size_t j = 0; j < local.dim; ++j) {
            double d = local.vectors[c][j] - global.vectors[c][j];
            total += d * d;
        }
    }
    return total;
}

PrototypeSet perturb_gaussian(const PrototypeSet& protos, double a, uint64_t seed) {
    if (a < 0.0) throw std::invalid_argument("noise scale must be >= 0");
    PrototypeSet out = protos;
    if (a == 0.0) return out;
    Rng rng(Rng::mix(seed, 0x6e01));
    for (size_t c = 0; c < out.num_classes; ++c) {
        if (!out.present[c]) continue;
        double norm = 0.0;
        for (double x : out.vectors[c]) norm += x * x;
        double sigma = a * std::sqrt(norm);
        for (double& x : out.vectors[c]) x += sigma * rng.normal();
    }
    return out;
}

std::vector<Vec> random_orthogonal(size_t h, uint64_t seed) {
    Rng rng(Rng::mix(seed, 0x0c7a));
    std::vector<Vec> q(h, Vec(h));
    for (;;) {
        for (auto& row : q)
            for (double& x : row) x = rng.normal();
        // modified Gram-Schmidt over rows
        bool ok = true;
        for (size_t i = 0; i < h && ok; ++i) {
            for (size_t k = 0; k < i; ++k) {
                double dot = 0.0;
                for (size_t j = 0; j < h; ++j) dot += q[i][j] * q[k][j];
                for (size_t j = 0; j < h; ++j) q[i][j] -= dot * q[k][j];
            }
            double norm = 0.0;
            for (double x : q[i]) norm += x * x;
            norm = std::sqrt(norm);
            if (norm < 1e-8) { ok = false; break; }
            for (double& x : q[i]) x /= norm;
        }
        if (ok) return q;
    }
}

PrototypeSet perturb_rotation(const PrototypeSet& protos, uint64_t seed) {
    if (protos.dim == 0) throw std::invalid_argument("prototype dimension must be >= 1");
    auto q = random_orthogonal(protos.dim, seed);
    PrototypeSet out = protos;
    for (size_t c = 0; c < out.num_classes; ++c) {
        if (!out.present[c]) continue;
        Vec rotated(out.dim, 0.0);
        for (size_t i = 0; i < out.dim; ++i)
            for (size_t j = 0; j < out.dim; ++j)
                rotated[i] += q[i][j] * protos.vectors[c][j];
        out.vectors[c] = std::move(rotated);
    }
    return out;
}

}  // namespace framp::proto
