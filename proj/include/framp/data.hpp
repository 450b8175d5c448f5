#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framp/nn.hpp"

namespace framp::data {

using Vec = std::vector<double>;

struct Dataset {
    size_t num_classes = 0;
    size_t input_dim = 0;
    nn::Batch train;
    nn::Batch test;
};

/// Gaussian blobs: class means uniform on a sphere of radius class_sep, unit
/// covariance, 80/20 train/test split per class.
Dataset gen_synthetic(size_t num_classes, size_t input_dim, size_t n_per_class,
                      double class_sep, uint64_t seed);

/// Per-class Dirichlet(alpha) proportions over clients; train and test shards use
/// the same proportions. Clients with an empty shard force a redraw (max 100).
std::vector<Dataset> dirichlet_partition(const Dataset& dataset, size_t num_clients,
                                         double alpha, uint64_t seed);

/// Shared random linear map k -> l applied to each train sample, then averaged.
Vec compute_descriptor(uint64_t extractor_seed, size_t descriptor_dim,
                       const Dataset& dataset);

Vec onehot_descriptor(size_t client, size_t num_clients, size_t descriptor_dim);

void export_csv(const std::vector<Dataset>& shards, const std::string& path);

}  // namespace framp::data
