#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "framp/fed_engine.hpp"
#include "framp/metrics.hpp"

namespace framp::experiment {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key=value experiment configuration. Unknown keys are errors.
struct Config {
    std::string method = "framp";
    uint64_t seed = 1;
    size_t rounds = 60;
    size_t eval_every = 10;
    std::string out = "out";

    // data
    size_t classes = 8;
    size_t input_dim = 16;
    size_t n_per_class = 100;
    double class_sep = 3.0;
    size_t clients = 20;
    double dirichlet_alpha = 0.3;
    size_t descriptor_dim = 128;

    // model
    std::vector<size_t> hidden_widths = {64, 32};
    std::string activation = "relu";

    // federation
    std::vector<double> levels = {1.0 / 64, 1.0 / 16, 1.0 / 4, 1.0};
    double participation = 0.5;
    size_t local_steps = 20;
    size_t batch_size = 16;
    double client_lr = 0.1;
    double hn_lr = 0.1;
    double lambda = 0.5;
    size_t hn_hidden = 64;
    std::string hn_update = "mean";

    // holdout / perturbation studies
    double holdout_fraction = 0.0;
    std::string holdout_mode = "per_group";   // or "smallest_group"
    std::string proto_noise = "none";
    double proto_noise_a = 0.0;
    uint64_t proto_noise_seed = 0;
};

Config parse_config_file(const std::string& path);
void apply_key(Config& cfg, const std::string& key, const std::string& value, int line);

struct ExperimentResult {
    Config config;
    fed::FederationState state;
    std::vector<data::Dataset> shards;
    nn::Batch union_testset;
    std::vector<size_t> training_clients;
    std::vector<size_t> holdout_clients;
    std::vector<metrics::EvalRow> eval_rows;
    std::vector<fed::RoundMetrics> round_metrics;
};

/// Builds data, runs all rounds, evaluates at the configured cadence. No file output.
ExperimentResult run(const Config& cfg);

/// run() plus metrics CSV, report JSON, mask bitsets and prototype CSV under cfg.out.
int run_experiment(const Config& cfg);

}  // namespace framp::experiment
