#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "framp/data.hpp"
#include "framp/hypernet.hpp"
#include "framp/masking.hpp"
#include "framp/nn.hpp"
#include "framp/prototypes.hpp"

namespace framp::fed {

using Vec = std::vector<double>;

enum class Method {
    Framp,
    FrampNoAlign,
    SharedMagnitude,
    SharedStatic,
    SharedRolling,
    FrampLayerwise,
    FrampOnehot,
};

Method parse_method(const std::string& name);
std::string method_name(Method m);
bool is_framp_family(Method m);

enum class ProtoNoise { None, Gaussian, Rotation };

struct EngineConfig {
    nn::ModelSpec spec;
    Method method = Method::Framp;
    double participation = 0.5;
    size_t local_steps = 20;
    size_t batch_size = 16;
    double client_lr = 0.1;
    double hn_lr = 0.1;
    double lambda = 0.5;
    size_t hn_hidden = 64;
    bool hn_update_sum = false;    // SUM instead of MEAN over per-client phi grads
    ProtoNoise proto_noise = ProtoNoise::None;
    double proto_noise_a = 0.0;
    uint64_t proto_noise_seed = 0;   // selects the obfuscation stream independently
    uint64_t seed = 1;
};

struct ClientReport {
    Vec delta;                  // zero off-mask
    proto::PrototypeSet protos;
    std::vector<double> train_loss;
};

struct RoundMetrics {
    size_t round = 0;
    std::vector<size_t> participants;
    double mean_train_loss = 0.0;
    double mean_alignment_loss = 0.0;   // vs. the global protos issued this round
};

struct FederationState {
    EngineConfig config;
    std::optional<hn::HyperNetState> hypernet;    // framp family
    Vec shared_params;                            // shared family
    proto::PrototypeSet global_protos;
    std::vector<Vec> descriptors;                 // per client
    std::vector<double> capacities;               // per client gamma
    std::vector<size_t> training_clients;         // indices eligible for sampling
    size_t round = 0;

    // per-parameter activation counts of server-issued masks, keyed by gamma level
    std::vector<double> levels;
    std::vector<Vec> mask_activation;             // per level, length d
    std::vector<size_t> mask_count;               // per level, masks accumulated
};

std::vector<double> assign_capacities(size_t num_clients,
                                      const std::vector<double>& levels, uint64_t seed);

std::vector<size_t> sample_participants(size_t num_clients, double ratio,
                                        uint64_t round, uint64_t seed);

ClientReport client_update(const nn::ModelSpec& spec, const Vec& submodel_params,
                           const mask::Mask& m, const proto::PrototypeSet* global_protos,
                           const data::Dataset& dataset, size_t steps, size_t batch_size,
                           double lr, double lambda, uint64_t seed);

/// Per index: current + sum(deltas) / sum(masks) where any client is active.
Vec aggregate_shared(const std::vector<ClientReport>& reports,
                     const std::vector<mask::Mask>& masks, const Vec& current);

FederationState init_state(const EngineConfig& config,
                           const std::vector<data::Dataset>& shards,
                           const std::vector<Vec>& descriptors,
                           const std::vector<double>& levels,
                           const std::vector<size_t>& training_clients);

/// Mask issued to a client by the configured variant for the given params.
mask::Mask issue_mask(const FederationState& state, const Vec& params, double gamma);

/// Parameters the server would issue to a client right now (masked submodel).
Vec issued_params(const FederationState& state, size_t client, mask::Mask& mask_out);

RoundMetrics run_round(FederationState& state, const std::vector<data::Dataset>& shards,
                       mask::MaskWriter* mask_writer = nullptr);

}  // namespace framp::fed
