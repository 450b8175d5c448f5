#include "framp/fed_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "framp/rng.hpp"

namespace framp::fed {

Method parse_method(const std::string& name) {
    if (name == "framp") return Method::Framp;
    if (name == "framp_no_align") return Method::FrampNoAlign;
    if (name == "shared_magnitude") return Method::SharedMagnitude;
    if (name == "shared_static") return Method::SharedStatic;
    if (name == "shared_rolling") return Method::SharedRolling;
    if (name == "framp_layerwise") return Method::FrampLayerwise;
    if (name == "framp_onehot") return Method::FrampOnehot;
    throw std::invalid_argument("unknown method: " + name);
}

std::string method_name(Method m) {
    switch (m) {
        case Method::Framp: return "framp";
        case Method::FrampNoAlign: return "framp_no_align";
        case Method::SharedMagnitude: return "shared_magnitude";
        case Method::SharedStatic: return "shared_static";
        case Method::SharedRolling: return "shared_rolling";
        case Method::FrampLayerwise: return "framp_layerwise";
        case Method::FrampOnehot: return "framp_onehot";
    }
    return "?";
}

bool is_framp_family(Method m) {
    return m == Method::Framp || m == Method::FrampNoAlign ||
           m == Method::FrampLayerwise || m == Method::FrampOnehot;
}

std::vector<double> assign_capacities(size_t num_clients,
                                      const std::vector<double>& levels, uint64_t seed) {
    if (levels.empty()) throw std::invalid_argument("empty capacity level list");
    if (num_clients < levels.size())
        throw std::invalid_argument("need at least one client per level");
    std::vector<size_t> order(num_clients);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(seed, 0xca9a));
    rng.shuffle(order);
    std::vector<double> caps(num_clients, 0.0);
    for (size_t i = 0; i < num_clients; ++i) caps[order[i]] = levels[i % levels.size()];
    return caps;
}

std::vector<size_t> sample_participants(size_t num_clients, double ratio,
                                        uint64_t round, uint64_t seed) {
    if (!(ratio > 0.0) || ratio > 1.0)
        throw std::invalid_argument("participation ratio must be in (0, 1]");
    size_t count = std::max<size_t>(
        1, static_cast<size_t>(std::llround(ratio * static_cast<double>(num_clients))));
    count = std::min(count, num_clients);
    std::vector<size_t> pool(num_clients);
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(Rng::mix(seed, round, 0x9a57));
    for (size_t i = 0; i < count; ++i) {
        size_t j = i + rng.uniform_int(num_clients - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

ClientReport client_update(const nn::ModelSpec& spec, const Vec& submodel_params,
                           const mask::Mask& m, const proto::PrototypeSet* global_protos,
                           const data::Dataset& dataset, size_t steps, size_t batch_size,
                           double lr, double lambda, uint64_t seed) {
    if (dataset.train.inputs.empty()) throw std::invalid_argument("empty client dataset");
    if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
    Rng rng(Rng::mix(seed, 0xc11e));
    size_t n = dataset.train.inputs.size();
    Vec params = submodel_params;
    ClientReport report;
    for (size_t t = 0; t < steps; ++t) {
        nn::Batch batch;
        size_t b = std::min(batch_size, n);
        batch.inputs.reserve(b);
        for (size_t i = 0; i < b; ++i) {
            size_t idx = rng.uniform_int(n);
            batch.inputs.push_back(dataset.train.inputs[idx]);
            batch.labels.push_back(dataset.train.labels[idx]);
        }
        auto lg = nn::loss_and_grad(spec, params, m.bits, batch, global_protos, lambda);
        for (size_t i = 0; i < params.size(); ++i) params[i] -= lr * lg.grad[i];
        report.train_loss.push_back(lg.loss);
    }
    report.delta.assign(params.size(), 0.0);
    for (size_t i = 0; i < params.size(); ++i)
        report.delta[i] = (params[i] - submodel_params[i]) * m.bits[i];
    report.protos = proto::local_prototypes(spec, params, m.bits, dataset.train);
    return report;
}

Vec aggregate_shared(const std::vector<ClientReport>& reports,
                     const std::vector<mask::Mask>& masks, const Vec& current) {
    if (reports.size() != masks.size())
        throw std::invalid_argument("reports/masks size mismatch");
    Vec next = current;
    Vec num(current.size(), 0.0), den(current.size(), 0.0);
    for (size_t r = 0; r < reports.size(); ++r) {
        if (reports[r].delta.size() != current.size() ||
            masks[r].bits.size() != current.size())
            throw std::invalid_argument("delta/mask length mismatch");
        for (size_t i = 0; i < current.size(); ++i) {
            num[i] += reports[r].delta[i];
            den[i] += masks[r].bits[i];
        }
    }
    for (size_t i = 0; i < current.size(); ++i)
        if (den[i] > 0.0) next[i] += num[i] / den[i];
    return next;
}

FederationState init_state(const EngineConfig& config,
                           const std::vector<data::Dataset>& shards,
                           const std::vector<Vec>& descriptors,
                           const std::vector<double>& levels,
                           const std::vector<size_t>& training_clients) {
    config.spec.validate();
    FederationState state;
    state.config = config;
    state.descriptors = descriptors;
    state.levels = levels;
    state.capacities = assign_capacities(shards.size(), levels,
                                         Rng::mix(config.seed, seed_role::capacities));
    state.training_clients = training_clients.empty()
        ? [&] {
              std::vector<size_t> all(shards.size());
              std::iota(all.begin(), all.end(), 0);
              return all;
          }()
        : training_clients;
    if (is_framp_family(config.method)) {
        state.hypernet = hn::init(descriptors.front().size(), config.hn_hidden,
                                  config.spec, Rng::mix(config.seed, seed_role::hn_init));
    } else {
        state.shared_params =
            nn::init_params(config.spec, Rng::mix(config.seed, seed_role::model_init));
    }
    state.global_protos =
        proto::PrototypeSet(config.spec.num_classes(), config.spec.encoder_dim());
    size_t d = config.spec.param_count();
    state.mask_activation.assign(levels.size(), Vec(d, 0.0));
    state.mask_count.assign(levels.size(), 0);
    return state;
}

namespace {

size_t level_index(const FederationState& state, double gamma) {
    for (size_t i = 0; i < state.levels.size(); ++i)
        if (state.levels[i] == gamma) return i;
    throw std::logic_error("client gamma not in configured level set");
}

}  // namespace

mask::Mask issue_mask(const FederationState& state, const Vec& params, double gamma) {
    switch (state.config.method) {
        case Method::Framp:
        case Method::FrampNoAlign:
        case Method::FrampOnehot:
        case Method::SharedMagnitude:
            return mask::global_topk(params, gamma);
        case Method::FrampLayerwise:
            return mask::layerwise_topk(params, state.config.spec, gamma);
        case Method::SharedStatic:
            return mask::static_prefix(state.config.spec, gamma);
        case Method::SharedRolling:
            return mask::rolling(state.config.spec, gamma, state.round);
    }
    throw std::logic_error("unreachable");
}

Vec issued_params(const FederationState& state, size_t client, mask::Mask& mask_out) {
    Vec full = is_framp_family(state.config.method)
                   ? hn::generate(*state.hypernet, state.descriptors[client])
                   : state.shared_params;
    mask_out = issue_mask(state, full, state.capacities[client]);
    for (size_t i = 0; i < full.size(); ++i) full[i] *= mask_out.bits[i];
    return full;
}

RoundMetrics run_round(FederationState& state, const std::vector<data::Dataset>& shards,
                       mask::MaskWriter* mask_writer) {
    const EngineConfig& cfg = state.config;
    bool framp = is_framp_family(cfg.method);
    bool use_protos = cfg.lambda > 0.0;

    auto picked = sample_participants(state.training_clients.size(), cfg.participation,
                                      state.round,
                                      Rng::mix(cfg.seed, seed_role::participation));
    std::vector<size_t> participants;
    participants.reserve(picked.size());
    for (size_t i : picked) participants.push_back(state.training_clients[i]);
    std::sort(participants.begin(), participants.end());

    // global prototypes as broadcast this round, optionally obfuscated
    proto::PrototypeSet issued_protos = state.global_protos;
    const proto::PrototypeSet* protos_ptr = use_protos ? &issued_protos : nullptr;

    RoundMetrics metrics;
    metrics.round = state.round;
    metrics.participants = participants;

    std::vector<ClientReport> reports;
    std::vector<mask::Mask> masks;
    std::vector<Vec> phi_grads;
    reports.reserve(participants.size());

    for (size_t n : participants) {
        mask::Mask m;
        Vec submodel = issued_params(state, n, m);
        if (mask_writer)
            mask_writer->append(static_cast<uint32_t>(state.round),
                                static_cast<uint32_t>(n), m);
        size_t li = level_index(state, state.capacities[n]);
        for (size_t i = 0; i < m.bits.size(); ++i)
            state.mask_activation[li][i] += m.bits[i];
        state.mask_count[li] += 1;

        ClientReport report;
        try {
            report = client_update(cfg.spec, submodel, m, protos_ptr, shards[n],
                                   cfg.local_steps, cfg.batch_size, cfg.client_lr,
                                   cfg.lambda,
                                   Rng::mix(cfg.seed, seed_role::client_batches,
                                            Rng::mix(state.round, n)));
        } catch (const std::exception& e) {
            throw std::runtime_error("client " + std::to_string(n) + ": " + e.what());
        }

        if (!report.train_loss.empty()) metrics.mean_train_loss += report.train_loss.back();
        if (use_protos)
            metrics.mean_alignment_loss +=
                proto::alignment_loss(report.protos, issued_protos);

        if (framp) {
            // phi descends along the VJP of <mask (.) H, initial - final>, which
            // moves the generated parameters toward the client's trained ones
            Vec neg_delta(report.delta.size());
            for (size_t i = 0; i < report.delta.size(); ++i) neg_delta[i] = -report.delta[i];
            phi_grads.push_back(
                hn::backward(*state.hypernet, state.descriptors[n], m.bits, neg_delta));
        }
        masks.push_back(std::move(m));
        reports.push_back(std::move(report));
    }

    if (!participants.empty()) {
        metrics.mean_train_loss /= static_cast<double>(participants.size());
        metrics.mean_alignment_loss /= static_cast<double>(participants.size());
    }

    if (framp) {
        if (cfg.hn_update_sum && !phi_grads.empty()) {
            Vec total(phi_grads.front().size(), 0.0);
            for (const auto& g : phi_grads)
                for (size_t i = 0; i < total.size(); ++i) total[i] += g[i];
            hn::step(*state.hypernet, {total}, cfg.hn_lr);
        } else {
            hn::step(*state.hypernet, phi_grads, cfg.hn_lr);
        }
    } else {
        state.shared_params = aggregate_shared(reports, masks, state.shared_params);
    }

    if (use_protos) {
        std::vector<proto::PrototypeSet> uploads;
        uploads.reserve(reports.size());
        for (size_t i = 0; i < reports.size(); ++i) {
            proto::PrototypeSet p = std::move(reports[i].protos);
            uint64_t noise_seed =
                Rng::mix(Rng::mix(cfg.seed, seed_role::proto_noise, cfg.proto_noise_seed),
                         Rng::mix(state.round, participants[i]));
            if (cfg.proto_noise == ProtoNoise::Gaussian)
                p = proto::perturb_gaussian(p, cfg.proto_noise_a, noise_seed);
            else if (cfg.proto_noise == ProtoNoise::Rotation)
                p = proto::perturb_rotation(p, noise_seed);
            uploads.push_back(std::move(p));
        }
        state.global_protos = proto::aggregate_global(uploads, state.global_protos);
    }

    state.round += 1;
    return metrics;
}

}  // namespace framp::fed
