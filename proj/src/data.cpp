#include "framp/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "framp/rng.hpp"

namespace framp::data {

Dataset gen_synthetic(size_t num_classes, size_t input_dim, size_t n_per_class,
                      double class_sep, uint64_t seed) {
    if (num_classes < 2) throw std::invalid_argument("need at least 2 classes");
    if (input_dim < 2) throw std::invalid_argument("need input dim >= 2");
    if (n_per_class == 0) throw std::invalid_argument("need samples per class");
    Rng rng(Rng::mix(seed, 0xda7a));
    Dataset ds;
    ds.num_classes = num_classes;
    ds.input_dim = input_dim;
    size_t n_train = static_cast<size_t>(std::floor(0.8 * static_cast<double>(n_per_class)));
    for (size_t c = 0; c < num_classes; ++c) {
        // class mean uniform on the sphere of radius class_sep
        Vec mean(input_dim);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (double& x : mean) { x = rng.normal(); norm += x * x; }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        for (double& x : mean) x *= class_sep / norm;
        for (size_t i = 0; i < n_per_class; ++i) {
            Vec x(input_dim);
            for (size_t j = 0; j < input_dim; ++j) x[j] = mean[j] + rng.normal();
            nn::Batch& split = i < n_train ? ds.train : ds.test;
            split.inputs.push_back(std::move(x));
            split.labels.push_back(static_cast<int>(c));
        }
    }
    return ds;
}

namespace {

// Split `count` items over clients proportionally to p, exact total, largest
// remainders first with index order as the deterministic tie-break.
std::vector<size_t> proportional_counts(const std::vector<double>& p, size_t count) {
    size_t n = p.size();
    std::vector<size_t> counts(n, 0);
    std::vector<std::pair<double, size_t>> rema(n);
    size_t assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        double exact = p[i] * static_cast<double>(count);
        counts[i] = static_cast<size_t>(std::floor(exact));
        assigned += counts[i];
        rema[i] = {exact - std::floor(exact), i};
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (size_t i = 0; assigned < count; ++i, ++assigned) counts[rema[i].second] += 1;
    return counts;
}

void distribute(const nn::Batch& pool, size_t num_classes,
                const std::vector<std::vector<double>>& proportions,
                std::vector<Dataset>& shards, bool to_train, Rng& rng) {
    std::vector<std::vector<size_t>> by_class(num_classes);
    for (size_t i = 0; i < pool.inputs.size(); ++i)
        by_class[pool.labels[i]].push_back(i);
    for (size_t c = 0; c < num_classes; ++c) {
        auto& idx = by_class[c];
        rng.shuffle(idx);
        auto counts = proportional_counts(proportions[c], idx.size());
        size_t cursor = 0;
        for (size_t n = 0; n < shards.size(); ++n) {
            nn::Batch& dst = to_train ? shards[n].train : shards[n].test;
            for (size_t k = 0; k < counts[n]; ++k, ++cursor) {
                dst.inputs.push_back(pool.inputs[idx[cursor]]);
                dst.labels.push_back(pool.labels[idx[cursor]]);
            }
        }
    }
}

}  // namespace

std::vector<Dataset> dirichlet_partition(const Dataset& dataset, size_t num_clients,
                                         double alpha, uint64_t seed) {
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be > 0");
    if (num_clients == 0) throw std::invalid_argument("need at least one client");
    Rng rng(Rng::mix(seed, 0xd1c1));
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<std::vector<double>> proportions(dataset.num_classes);
        for (auto& p : proportions) p = rng.dirichlet(alpha, num_clients);
        std::vector<Dataset> shards(num_clients);
        for (auto& s : shards) {
            s.num_classes = dataset.num_classes;
            s.input_dim = dataset.input_dim;
        }
        distribute(dataset.train, dataset.num_classes, proportions, shards, true, rng);
        distribute(dataset.test, dataset.num_classes, proportions, shards, false, rng);
        bool ok = true;
        for (const auto& s : shards)
            if (s.train.inputs.empty() || s.test.inputs.empty()) { ok = false; break; }
        if (ok) return shards;
    }
    throw std::runtime_error("dirichlet partition kept producing empty shards");
}

Vec compute_descriptor(uint64_t extractor_seed, size_t descriptor_dim,
                       const Dataset& dataset) {
    if (dataset.train.inputs.empty()) throw std::invalid_argument("empty dataset");
    size_t k = dataset.input_dim;
    // one extractor shared by every client: seeded independently of the data
    Rng rng(Rng::mix(extractor_seed, 0xfea7));
    std::vector<Vec> map(descriptor_dim, Vec(k));
    double scale = 1.0 / std::sqrt(static_cast<double>(k));
    for (auto& row : map)
        for (double& x : row) x = scale * rng.normal();
    Vec v(descriptor_dim, 0.0);
    for (const auto& x : dataset.train.inputs)
        for (size_t i = 0; i < descriptor_dim; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < k; ++j) s += map[i][j] * x[j];
            v[i] += s;
        }
    double inv = 1.0 / static_cast<double>(dataset.train.inputs.size());
    for (double& x : v) x *= inv;
    return v;
}

Vec onehot_descriptor(size_t client, size_t num_clients, size_t descriptor_dim) {
    if (client >= num_clients || num_clients > descriptor_dim)
        throw std::invalid_argument("onehot descriptor index out of range");
    Vec v(descriptor_dim, 0.0);
    v[client] = 1.0;
    return v;
}

void export_csv(const std::vector<Dataset>& shards, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open dataset csv: " + path);
    out << "split,client,label,features\n";
    for (size_t n = 0; n < shards.size(); ++n) {
        auto dump = [&](const nn::Batch& b, const char* split) {
            for (size_t i = 0; i < b.inputs.size(); ++i) {
                out << split << ',' << n << ',' << b.labels[i];
                for (double x : b.inputs[i]) out << ',' << x;
                out << '\n';
            }
        };
        dump(shards[n].train, "train");
        dump(shards[n].test, "test");
    }
}

}  // namespace framp::data
