#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace framp::nn {
struct ModelSpec;
struct Batch;
}

namespace framp::proto {

using Vec = std::vector<double>;

/// Per-class encoder-output centroids. Classes with no supporting samples are absent.
struct PrototypeSet {
    size_t num_classes = 0;
    size_t dim = 0;
    std::vector<bool> present;      // length num_classes
    std::vector<Vec> vectors;       // length num_classes; only present entries meaningful

    PrototypeSet() = default;
    PrototypeSet(size_t classes, size_t h)
        : num_classes(classes), dim(h), present(classes, false),
          vectors(classes, Vec(h, 0.0)) {}

    bool any_present() const;
};

/// Per-class mean of encoder outputs over the dataset, computed with masked params.
PrototypeSet local_prototypes(const nn::ModelSpec& spec, const Vec& params,
                              const Vec& mask, const nn::Batch& dataset);

PrototypeSet aggregate_global(const std::vector<PrototypeSet>& locals,
                              const PrototypeSet& previous);

/// Sum over classes present in both sets of squared Euclidean distance.
double alignment_loss(const PrototypeSet& local, const PrototypeSet& global);

/// Adds N(0, sigma^2 I) per prototype with sigma = a * ||P||.
PrototypeSet perturb_gaussian(const PrototypeSet& protos, double a, uint64_t seed);

/// Applies one random orthogonal matrix to every present prototype.
PrototypeSet perturb_rotation(const PrototypeSet& protos, uint64_t seed);

/// Orthonormalized Gaussian matrix (h x h, row-major).
std::vector<Vec> random_orthogonal(size_t h, uint64_t seed);

}  // namespace framp::proto
