#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framp/data.hpp"
#include "framp/fed_engine.hpp"

namespace framp::metrics {

using Vec = std::vector<double>;

/// Fraction of argmax-correct predictions; logit ties resolve to the lowest class.
double evaluate(const nn::ModelSpec& spec, const Vec& params, const Vec& mask,
                const nn::Batch& testset);

struct CoverageResult {
    Vec curve;      // cumulative, in [0,1], length d
    double gini = 0.0;
};

/// Per-parameter activation frequency of a group's masks, cumulative coverage
/// curve in flat-index order, and Gini over the frequencies.
CoverageResult mask_coverage(const std::vector<Vec>& group_masks);
CoverageResult coverage_from_activation(const Vec& activation_counts, size_t num_masks);

/// Accuracy of submodels synthesized from the mean training-client descriptor
/// (framp family) or cut from the shared model, one per requested gamma,
/// on the merged test set.
std::vector<double> union_evaluate(const fed::FederationState& state,
                                   const std::vector<double>& gammas,
                                   const nn::Batch& union_testset);

struct EvalRow {
    size_t round = 0;
    std::vector<double> group_accuracy;   // per capacity level
    double local = 0.0;                   // participation-weighted mean of groups
    double union_mean = 0.0;              // unweighted mean over per-gamma union accuracy
    std::vector<double> union_accuracy;
    double align_loss = 0.0;
    std::vector<double> group_gini;       // per level, accumulated mask activation
};

/// Group/local/union accuracy table over the given clients (training set by default).
EvalRow evaluate_state(const fed::FederationState& state,
                       const std::vector<data::Dataset>& shards,
                       const nn::Batch& union_testset,
                       const std::vector<size_t>& clients);

/// Frozen-generator evaluation of holdout clients: generate, mask, score. No training.
std::vector<double> new_client_eval(const fed::FederationState& state,
                                    const std::vector<data::Dataset>& shards,
                                    const std::vector<size_t>& holdout_clients);

}  // namespace framp::metrics
