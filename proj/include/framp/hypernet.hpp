#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framp/nn.hpp"

namespace framp::hn {

using Vec = std::vector<double>;

/// Two-layer dense generator: descriptor (l) -> tanh hidden (m) -> flat params (d).
/// phi layout: W1 (m x l, row-major), b1 (m), W2 (d x m, row-major), b2 (d).
struct HyperNetState {
    size_t descriptor_dim = 0;   // l
    size_t hidden_dim = 0;       // m
    nn::ModelSpec target;
    Vec phi;

    size_t output_dim() const { return target.param_count(); }
    static size_t phi_size(size_t l, size_t m, size_t d) {
        return m * l + m + d * m + d;
    }
};

HyperNetState init(size_t descriptor_dim, size_t hidden_dim,
                   const nn::ModelSpec& target, uint64_t seed);

Vec generate(const HyperNetState& state, const Vec& descriptor);

/// Vector-Jacobian product of <mask (.) H(v; phi), delta> w.r.t. phi.
Vec backward(const HyperNetState& state, const Vec& descriptor, const Vec& mask,
             const Vec& delta);

/// phi <- phi - beta * mean(phi_grads). Empty list is a no-op (warning counter bumped).
void step(HyperNetState& state, const std::vector<Vec>& phi_grads, double beta);

size_t empty_step_warnings();

void save_checkpoint(const HyperNetState& state, const std::string& path);
HyperNetState load_checkpoint(const std::string& path);

}  // namespace framp::hn
