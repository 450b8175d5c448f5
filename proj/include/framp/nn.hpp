#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "framp/prototypes.hpp"

namespace framp::nn {

using Vec = std::vector<double>;

enum class Activation { Relu, Tanh };

Activation parse_activation(const std::string& name);

/// Dense feedforward classifier shape. layer_widths = [input, hidden..., encoder, classes].
/// The last hidden width is the encoder dimension; for a spec with no hidden
/// layer the encoder is the identity on the input.
struct ModelSpec {
    std::vector<size_t> layer_widths;
    Activation activation = Activation::Relu;

    size_t num_layers() const { return layer_widths.size() - 1; }
    size_t input_dim() const { return layer_widths.front(); }
    size_t num_classes() const { return layer_widths.back(); }
    size_t encoder_dim() const { return layer_widths[layer_widths.size() - 2]; }

    // flat layout: per layer, weight matrix (out x in, row-major) then bias (out)
    size_t layer_param_count(size_t layer) const {
        return layer_widths[layer] * layer_widths[layer + 1] + layer_widths[layer + 1];
    }
    size_t layer_offset(size_t layer) const;
    size_t param_count() const;
    size_t weight_index(size_t layer, size_t row, size_t col) const {
        return layer_offset(layer) + row * layer_widths[layer] + col;
    }
    size_t bias_index(size_t layer, size_t row) const {
        return layer_offset(layer) + layer_widths[layer + 1] * layer_widths[layer] + row;
    }

    void validate() const;
};

struct Batch {
    std::vector<Vec> inputs;
    std::vector<int> labels;

    size_t size() const { return inputs.size(); }
};

struct ForwardResult {
    Vec logits;
    Vec hidden;
};

struct LossResult {
    double loss = 0.0;
    double cross_entropy = 0.0;
    double alignment = 0.0;
    Vec grad;                       // same length as params, zero off-mask
    proto::PrototypeSet batch_protos;
};

Vec init_params(const ModelSpec& spec, uint64_t seed);

ForwardResult forward(const ModelSpec& spec, const Vec& params, const Vec& mask,
                      const Vec& x);

/// Mean softmax cross-entropy over the batch plus lambda times the squared-Euclidean
/// distance between batch-level class prototypes and their global counterparts
/// (summed over classes present in both). Gradient is exact and zero off-mask.
LossResult loss_and_grad(const ModelSpec& spec, const Vec& params, const Vec& mask,
                         const Batch& batch, const proto::PrototypeSet* global_protos,
                         double lambda);

}  // namespace framp::nn
