#include "framp/hypernet.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "framp/rng.hpp"

namespace framp::hn {

namespace {
std::atomic<size_t> g_empty_step_warnings{0};

struct PhiView {
    const double* w1;   // m x l
    const double* b1;   // m
    const double* w2;   // d x m
    const double* b2;   // d
};

PhiView view(const HyperNetState& s) {
    size_t l = s.descriptor_dim, m = s.hidden_dim, d = s.output_dim();
    const double* p = s.phi.data();
    return {p, p + m * l, p + m * l + m, p + m * l + m + d * m};
}

void check(const HyperNetState& s, const Vec& v) {
    if (s.phi.size() != HyperNetState::phi_size(s.descriptor_dim, s.hidden_dim, s.output_dim()))
        throw std::invalid_argument("phi length inconsistent with config");
    if (v.size() != s.descriptor_dim)
        throw std::invalid_argument("descriptor dimension mismatch");
}

Vec hidden_activation(const HyperNetState& s, const Vec& v) {
    auto p = view(s);
    size_t l = s.descriptor_dim, m = s.hidden_dim;
    Vec a(m);
    for (size_t i = 0; i < m; ++i) {
        double z = p.b1[i];
        const double* row = p.w1 + i * l;
        for (size_t j = 0; j < l; ++j) z += row[j] * v[j];
        a[i] = std::tanh(z);
    }
    return a;
}

}  // namespace

HyperNetState init(size_t descriptor_dim, size_t hidden_dim,
                   const nn::ModelSpec& target, uint64_t seed) {
    target.validate();
    if (descriptor_dim == 0 || hidden_dim == 0)
        throw std::invalid_argument("hypernet dims must be positive");
    HyperNetState s;
    s.descriptor_dim = descriptor_dim;
    s.hidden_dim = hidden_dim;
    s.target = target;
    size_t d = target.param_count();
    s.phi.assign(HyperNetState::phi_size(descriptor_dim, hidden_dim, d), 0.0);
    Rng rng(Rng::mix(seed, 0x49e1));
    double s1 = 1.0 / std::sqrt(static_cast<double>(descriptor_dim));
    // output layer damped so generated models start near standard fan-in scale
    double s2 = 0.1 / std::sqrt(static_cast<double>(hidden_dim));
    size_t w1n = hidden_dim * descriptor_dim;
    for (size_t i = 0; i < w1n; ++i) s.phi[i] = s1 * rng.normal();
    size_t w2off = w1n + hidden_dim;
    for (size_t i = 0; i < d * hidden_dim; ++i) s.phi[w2off + i] = s2 * rng.normal();
    return s;
}

Vec generate(const HyperNetState& state, const Vec& descriptor) {
    check(state, descriptor);
    auto p = view(state);
    size_t m = state.hidden_dim, d = state.output_dim();
    Vec a = hidden_activation(state, descriptor);
    Vec out(d);
    for (size_t i = 0; i < d; ++i) {
        double z = p.b2[i];
        const double* row = p.w2 + i * m;
        for (size_t j = 0; j < m; ++j) z += row[j] * a[j];
        out[i] = z;
    }
    return out;
}

Vec backward(const HyperNetState& state, const Vec& descriptor, const Vec& mask,
             const Vec& delta) {
    check(state, descriptor);
    size_t l = state.descriptor_dim, m = state.hidden_dim, d = state.output_dim();
    if (mask.size() != d || delta.size() != d)
        throw std::invalid_argument("mask/delta length mismatch");
    auto p = view(state);
    Vec a = hidden_activation(state, descriptor);

    Vec grad(state.phi.size(), 0.0);
    double* gw1 = grad.data();
    double* gb1 = gw1 + m * l;
    double* gw2 = gb1 + m;
    double* gb2 = gw2 + d * m;

    // upstream at the output is mask (.) delta
    Vec ga(m, 0.0);
    for (size_t i = 0; i < d; ++i) {
        double u = mask[i] * delta[i];
        if (u == 0.0) continue;
        gb2[i] = u;
        const double* row = p.w2 + i * m;
        double* grow = gw2 + i * m;
        for (size_t j = 0; j < m; ++j) {
            grow[j] = u * a[j];
            ga[j] += u * row[j];
        }
    }
    for (size_t j = 0; j < m; ++j) {
        double gz = ga[j] * (1.0 - a[j] * a[j]);
        gb1[j] = gz;
        double* grow = gw1 + j * l;
        for (size_t q = 0; q < l; ++q) grow[q] = gz * descriptor[q];
    }
    return grad;
}

void step(HyperNetState& state, const std::vector<Vec>& phi_grads, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    if (phi_grads.empty()) {
        ++g_empty_step_warnings;
        return;
    }
    double scale = beta / static_cast<double>(phi_grads.size());
    for (const auto& g : phi_grads) {
        if (g.size() != state.phi.size())
            throw std::invalid_argument("phi gradient length mismatch");
        for (size_t i = 0; i < g.size(); ++i) state.phi[i] -= scale * g[i];
    }
}

size_t empty_step_warnings() { return g_empty_step_warnings.load(); }

void save_checkpoint(const HyperNetState& state, const std::string& path) {
    nlohmann::json j;
    j["descriptor_dim"] = state.descriptor_dim;
    j["hidden_dim"] = state.hidden_dim;
    j["layer_widths"] = state.target.layer_widths;
    j["activation"] = state.target.activation == nn::Activation::Relu ? "relu" : "tanh";
    j["phi"] = state.phi;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open checkpoint file: " + path);
    out << j.dump();
}

HyperNetState load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    HyperNetState s;
    s.descriptor_dim = j.at("descriptor_dim").get<size_t>();
    s.hidden_dim = j.at("hidden_dim").get<size_t>();
    s.target.layer_widths = j.at("layer_widths").get<std::vector<size_t>>();
    s.target.activation = nn::parse_activation(j.at("activation").get<std::string>());
    s.phi = j.at("phi").get<Vec>();
    if (s.phi.size() !=
        HyperNetState::phi_size(s.descriptor_dim, s.hidden_dim, s.target.param_count()))
        throw std::runtime_error("checkpoint phi length inconsistent");
    return s;
}

}  // namespace framp::hn
