#include "framp/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "framp/rng.hpp"

namespace framp::nn {

Activation parse_activation(const std::string& name) {
    if (name == "relu") return Activation::Relu;
    if (name == "tanh") return Activation::Tanh;
    throw std::invalid_argument("unknown activation: " + name);
}

size_t ModelSpec::layer_offset(size_t layer) const {
    size_t off = 0;
    for (size_t l = 0; l < layer; ++l) off += layer_param_count(l);
    return off;
}

size_t ModelSpec::param_count() const {
    return layer_offset(num_layers());
}

void ModelSpec::validate() const {
    if (layer_widths.size() < 2)
        throw std::invalid_argument("model spec needs at least input and logit widths");
    for (size_t w : layer_widths)
        if (w == 0) throw std::invalid_argument("layer widths must be positive");
    if (num_classes() < 2)
        throw std::invalid_argument("need at least 2 classes");
}

Vec init_params(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    Vec params(spec.param_count(), 0.0);
    Rng rng(Rng::mix(seed, 0xf1a7));
    for (size_t l = 0; l < spec.num_layers(); ++l) {
        size_t fan_in = spec.layer_widths[l];
        size_t out = spec.layer_widths[l + 1];
        double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        size_t off = spec.layer_offset(l);
        for (size_t i = 0; i < out * fan_in; ++i) params[off + i] = scale * rng.normal();
        // biases stay zero
    }
    return params;
}

namespace {

double activate(Activation a, double z) {
    return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double activate_grad(Activation a, double z, double y) {
    return a == Activation::Relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0 - y * y;
}

void check_shapes(const ModelSpec& spec, const Vec& params, const Vec& mask) {
    size_t d = spec.param_count();
    if (params.size() != d) throw std::invalid_argument("params length != spec param count");
    if (mask.size() != d) throw std::invalid_argument("mask length != spec param count");
}

// Forward keeping pre-activations and activations per layer for backprop.
struct Trace {
    std::vector<Vec> pre;    // per layer, length out
    std::vector<Vec> act;    // act[0] = input, act[l+1] = output of layer l
};

Trace forward_trace(const ModelSpec& spec, const Vec& params, const Vec& mask,
                    const Vec& x) {
    Trace t;
    t.act.push_back(x);
    size_t L = spec.num_layers();
    for (size_t l = 0; l < L; ++l) {
        size_t in = spec.layer_widths[l];
        size_t out = spec.layer_widths[l + 1];
        size_t off = spec.layer_offset(l);
        const Vec& a = t.act.back();
        Vec z(out, 0.0);
        for (size_t r = 0; r < out; ++r) {
            double s = 0.0;
            size_t wrow = off + r * in;
            for (size_t c = 0; c < in; ++c) s += params[wrow + c] * mask[wrow + c] * a[c];
            size_t bi = off + out * in + r;
            s += params[bi] * mask[bi];
            z[r] = s;
        }
        Vec y(out);
        if (l + 1 == L) {
            y = z;   // logits stay linear
        } else {
            for (size_t r = 0; r < out; ++r) y[r] = activate(spec.activation, z[r]);
        }
        t.pre.push_back(std::move(z));
        t.act.push_back(std::move(y));
    }
    return t;
}

}  // namespace

ForwardResult forward(const ModelSpec& spec, const Vec& params, const Vec& mask,
                      const Vec& x) {
    check_shapes(spec, params, mask);
    if (x.size() != spec.input_dim()) throw std::invalid_argument("input dim mismatch");
    Trace t = forward_trace(spec, params, mask, x);
    ForwardResult r;
    r.logits = t.act.back();
    r.hidden = t.act[t.act.size() - 2];   // input itself when there is no hidden layer
    return r;
}

LossResult loss_and_grad(const ModelSpec& spec, const Vec& params, const Vec& mask,
                         const Batch& batch, const proto::PrototypeSet* global_protos,
                         double lambda) {
    check_shapes(spec, params, mask);
    if (batch.size() == 0) throw std::invalid_argument("empty batch");
    if (batch.labels.size() != batch.inputs.size())
        throw std::invalid_argument("batch labels/inputs size mismatch");
    size_t C = spec.num_classes();
    size_t h = spec.encoder_dim();
    for (int y : batch.labels)
        if (y < 0 || static_cast<size_t>(y) >= C)
            throw std::invalid_argument("label out of range");
    if (lambda > 0.0 && global_protos == nullptr)
        throw std::invalid_argument("lambda > 0 requires global prototypes");
    if (lambda > 0.0 && global_protos->dim != h)
        throw std::invalid_argument("global prototype dimension mismatch");

    size_t B = batch.size();
    size_t L = spec.num_layers();
    double inv_b = 1.0 / static_cast<double>(B);

    LossResult res;
    res.grad.assign(params.size(), 0.0);
    res.batch_protos = proto::PrototypeSet(C, h);

    std::vector<Trace> traces(B);
    std::vector<size_t> class_count(C, 0);
    for (size_t i = 0; i < B; ++i) {
        traces[i] = forward_trace(spec, params, mask, batch.inputs[i]);
        ++class_count[batch.labels[i]];
    }

    // batch-level class prototypes from the encoder outputs
    for (size_t i = 0; i < B; ++i) {
        const Vec& hv = traces[i].act[traces[i].act.size() - 2];
        Vec& p = res.batch_protos.vectors[batch.labels[i]];
        for (size_t j = 0; j < h; ++j) p[j] += hv[j];
    }
    for (size_t c = 0; c < C; ++c) {
        if (class_count[c] == 0) continue;
        res.batch_protos.present[c] = true;
        for (size_t j = 0; j < h; ++j)
            res.batch_protos.vectors[c][j] /= static_cast<double>(class_count[c]);
    }

    double align = 0.0;
    // extra gradient on each hidden vector from the alignment term:
    // d/dh_i ||p_c - P_c||^2 = 2 (p_c - P_c) / |class c in batch|
    std::vector<Vec> align_hidden_grad(C);
    if (lambda > 0.0) {
        for (size_t c = 0; c < C; ++c) {
            if (!res.batch_protos.present[c] || !global_protos->present[c]) continue;
            const Vec& p = res.batch_protos.vectors[c];
            const Vec& g = global_protos->vectors[c];
            Vec diff(h);
            double d2 = 0.0;
            for (size_t j = 0; j < h; ++j) {
                diff[j] = p[j] - g[j];
                d2 += diff[j] * diff[j];
            }
            align += d2;
            Vec& hg = align_hidden_grad[c];
            hg.assign(h, 0.0);
            double scale = 2.0 * lambda / static_cast<double>(class_count[c]);
            for (size_t j = 0; j < h; ++j) hg[j] = scale * diff[j];
        }
    }

    double ce = 0.0;
    for (size_t i = 0; i < B; ++i) {
        Trace& t = traces[i];
        int y = batch.labels[i];
        const Vec& logits = t.act.back();
        double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double z : logits) sum += std::exp(z - mx);
        double lse = mx + std::log(sum);
        ce += (lse - logits[y]) * inv_b;

        // upstream gradient at the logits
        Vec up(C);
        for (size_t c = 0; c < C; ++c)
            up[c] = (std::exp(logits[c] - mx) / sum - (static_cast<size_t>(y) == c ? 1.0 : 0.0)) * inv_b;

        for (size_t l = L; l-- > 0;) {
            size_t in = spec.layer_widths[l];
            size_t out = spec.layer_widths[l + 1];
            size_t off = spec.layer_offset(l);
            const Vec& a_in = t.act[l];
            // hidden activation gradient: apply nonlinearity, then add the
            // alignment contribution at the encoder layer
            if (l + 1 < L) {
                for (size_t r = 0; r < out; ++r)
                    up[r] *= activate_grad(spec.activation, t.pre[l][r], t.act[l + 1][r]);
            }
            Vec down(in, 0.0);
            for (size_t r = 0; r < out; ++r) {
                double u = up[r];
                if (u == 0.0) continue;
                size_t wrow = off + r * in;
                for (size_t c = 0; c < in; ++c) {
                    res.grad[wrow + c] += u * a_in[c] * mask[wrow + c];
                    down[c] += u * params[wrow + c] * mask[wrow + c];
                }
                res.grad[off + out * in + r] += u * mask[off + out * in + r];
            }
            if (l >= 1 && l == L - 1 && lambda > 0.0) {
                // entering the encoder output: add the prototype-alignment pull
                const Vec& hg = align_hidden_grad[y];
                if (!hg.empty())
                    for (size_t j = 0; j < in; ++j) down[j] += hg[j];
            }
            up = std::move(down);
        }
        // degenerate no-hidden spec: alignment grad would land on the input, dropped
    }

    res.cross_entropy = ce;
    res.alignment = align;
    res.loss = ce + lambda * align;
    return res;
}

}  // namespace framp::nn
