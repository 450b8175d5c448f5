#include "framp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "framp/hypernet.hpp"

namespace framp::metrics {

double evaluate(const nn::ModelSpec& spec, const Vec& params, const Vec& mask,
                const nn::Batch& testset) {
    if (testset.size() == 0) throw std::invalid_argument("empty test set");
    size_t correct = 0;
    for (size_t i = 0; i < testset.size(); ++i) {
        auto fr = nn::forward(spec, params, mask, testset.inputs[i]);
        size_t best = 0;
        for (size_t c = 1; c < fr.logits.size(); ++c)
            if (fr.logits[c] > fr.logits[best]) best = c;   // ties keep the lower class
        if (static_cast<int>(best) == testset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(testset.size());
}

namespace {

double gini_of(Vec values) {
    size_t n = values.size();
    std::sort(values.begin(), values.end());
    double sum = std::accumulate(values.begin(), values.end(), 0.0);
    if (sum <= 0.0) throw std::invalid_argument("all-zero activation: gini undefined");
    double weighted = 0.0;
    for (size_t i = 0; i < n; ++i)
        weighted += static_cast<double>(i + 1) * values[i];
    double nd = static_cast<double>(n);
    return 2.0 * weighted / (nd * sum) - (nd + 1.0) / nd;
}

}  // namespace

CoverageResult mask_coverage(const std::vector<Vec>& group_masks) {
    if (group_masks.empty()) throw std::invalid_argument("need at least one mask");
    size_t d = group_masks.front().size();
    Vec counts(d, 0.0);
    for (const auto& m : group_masks) {
        if (m.size() != d) throw std::invalid_argument("mask length mismatch");
        for (size_t i = 0; i < d; ++i) counts[i] += m[i];
    }
    return coverage_from_activation(counts, group_masks.size());
}

CoverageResult coverage_from_activation(const Vec& activation_counts, size_t num_masks) {
    if (num_masks == 0) throw std::invalid_argument("need at least one mask");
    size_t d = activation_counts.size();
    Vec p(d);
    for (size_t i = 0; i < d; ++i)
        p[i] = activation_counts[i] / static_cast<double>(num_masks);
    double total = std::accumulate(p.begin(), p.end(), 0.0);
    if (total <= 0.0) throw std::invalid_argument("all-zero activation: curve undefined");
    CoverageResult r;
    r.curve.resize(d);
    double run = 0.0;
    for (size_t i = 0; i < d; ++i) {
        run += p[i];
        r.curve[i] = run / total;
    }
    r.curve.back() = 1.0;
    r.gini = gini_of(std::move(p));
    return r;
}

std::vector<double> union_evaluate(const fed::FederationState& state,
                                   const std::vector<double>& gammas,
                                   const nn::Batch& union_testset) {
    Vec full;
    if (fed::is_framp_family(state.config.method)) {
        const auto& tc = state.training_clients;
        Vec mean_desc(state.descriptors.front().size(), 0.0);
        for (size_t n : tc)
            for (size_t j = 0; j < mean_desc.size(); ++j)
                mean_desc[j] += state.descriptors[n][j];
        for (double& x : mean_desc) x /= static_cast<double>(tc.size());
        full = hn::generate(*state.hypernet, mean_desc);
    } else {
        full = state.shared_params;
    }
    std::vector<double> acc;
    acc.reserve(gammas.size());
    for (double g : gammas) {
        auto m = mask::global_topk(full, g);
        Vec sub(full.size());
        for (size_t i = 0; i < full.size(); ++i) sub[i] = full[i] * m.bits[i];
        acc.push_back(evaluate(state.config.spec, sub, m.bits, union_testset));
    }
    return acc;
}

EvalRow evaluate_state(const fed::FederationState& state,
                       const std::vector<data::Dataset>& shards,
                       const nn::Batch& union_testset,
                       const std::vector<size_t>& clients) {
    size_t L = state.levels.size();
    EvalRow row;
    row.round = state.round;
    std::vector<double> group_sum(L, 0.0);
    std::vector<size_t> group_count(L, 0);
    for (size_t n : clients) {
        mask::Mask m;
        Vec sub = fed::issued_params(state, n, m);
        double acc = evaluate(state.config.spec, sub, m.bits, shards[n].test);
        size_t li = 0;
        while (li < L && state.levels[li] != state.capacities[n]) ++li;
        group_sum[li] += acc;
        group_count[li] += 1;
    }
    row.group_accuracy.assign(L, 0.0);
    double local = 0.0;
    for (size_t li = 0; li < L; ++li) {
        if (group_count[li] > 0)
            row.group_accuracy[li] = group_sum[li] / static_cast<double>(group_count[li]);
        // Local is the participation-weighted mean of the group columns
        local += static_cast<double>(group_count[li]) /
                 static_cast<double>(clients.size()) * row.group_accuracy[li];
    }
    row.local = local;
    row.union_accuracy = union_evaluate(state, state.levels, union_testset);
    row.union_mean = std::accumulate(row.union_accuracy.begin(),
                                     row.union_accuracy.end(), 0.0) /
                     static_cast<double>(row.union_accuracy.size());
    row.group_gini.assign(L, 0.0);
    for (size_t li = 0; li < L; ++li)
        if (state.mask_count[li] > 0)
            row.group_gini[li] =
                coverage_from_activation(state.mask_activation[li], state.mask_count[li])
                    .gini;
    return row;
}

std::vector<double> new_client_eval(const fed::FederationState& state,
                                    const std::vector<data::Dataset>& shards,
                                    const std::vector<size_t>& holdout_clients) {
    std::vector<double> acc;
    acc.reserve(holdout_clients.size());
    for (size_t n : holdout_clients) {
        mask::Mask m;
        Vec sub = fed::issued_params(state, n, m);
        acc.push_back(evaluate(state.config.spec, sub, m.bits, shards[n].test));
    }
    return acc;
}

}  // namespace framp::metrics
