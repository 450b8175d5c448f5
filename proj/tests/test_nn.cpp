#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "framp/nn.hpp"
#include "framp/rng.hpp"

using namespace framp;
using nn::Vec;

namespace {

Vec ones(size_t n) { return Vec(n, 1.0); }
Vec zeros(size_t n) { return Vec(n, 0.0); }

nn::ModelSpec make_spec(std::vector<size_t> widths,
                        nn::Activation act = nn::Activation::Tanh) {
    nn::ModelSpec s;
    s.layer_widths = std::move(widths);
    s.activation = act;
    return s;
}

nn::Batch random_batch(const nn::ModelSpec& spec, size_t b, Rng& rng) {
    nn::Batch batch;
    for (size_t i = 0; i < b; ++i) {
        Vec x(spec.input_dim());
        for (double& v : x) v = rng.normal();
        batch.inputs.push_back(std::move(x));
        batch.labels.push_back(static_cast<int>(rng.uniform_int(spec.num_classes())));
    }
    return batch;
}

proto::PrototypeSet random_protos(size_t C, size_t h, Rng& rng) {
    proto::PrototypeSet p(C, h);
    for (size_t c = 0; c < C; ++c) {
        p.present[c] = true;
        for (double& v : p.vectors[c]) v = rng.normal();
    }
    return p;
}

// independent oracle: loss recomputed at perturbed params, central differences
double loss_at(const nn::ModelSpec& spec, const Vec& params, const Vec& mask,
               const nn::Batch& batch, const proto::PrototypeSet* gp, double lambda) {
    return nn::loss_and_grad(spec, params, mask, batch, gp, lambda).loss;
}

}  // namespace

TEST_CASE("param layout and count") {
    auto spec = make_spec({2, 3});
    CHECK(spec.param_count() == 9);
    auto p = nn::init_params(spec, 42);
    CHECK(p.size() == 9);

    auto spec2 = make_spec({4, 16, 3});
    CHECK(spec2.param_count() == 4 * 16 + 16 + 16 * 3 + 3);
    // bijective (layer,row,col) -> flat map: every index hit exactly once
    std::vector<int> hits(spec2.param_count(), 0);
    for (size_t l = 0; l < spec2.num_layers(); ++l) {
        for (size_t r = 0; r < spec2.layer_widths[l + 1]; ++r) {
            for (size_t c = 0; c < spec2.layer_widths[l]; ++c)
                hits[spec2.weight_index(l, r, c)]++;
            hits[spec2.bias_index(l, r)]++;
        }
    }
    for (int h : hits) CHECK(h == 1);

    // flatten/unflatten round-trip is bit-exact
    auto p2 = nn::init_params(spec2, 11);
    std::vector<std::vector<Vec>> weights;
    std::vector<Vec> biases;
    for (size_t l = 0; l < spec2.num_layers(); ++l) {
        std::vector<Vec> w(spec2.layer_widths[l + 1], Vec(spec2.layer_widths[l]));
        Vec b(spec2.layer_widths[l + 1]);
        for (size_t r = 0; r < w.size(); ++r) {
            for (size_t c = 0; c < w[r].size(); ++c) w[r][c] = p2[spec2.weight_index(l, r, c)];
            b[r] = p2[spec2.bias_index(l, r)];
        }
        weights.push_back(std::move(w));
        biases.push_back(std::move(b));
    }
    Vec flat(spec2.param_count());
    for (size_t l = 0; l < spec2.num_layers(); ++l)
        for (size_t r = 0; r < weights[l].size(); ++r) {
            for (size_t c = 0; c < weights[l][r].size(); ++c)
                flat[spec2.weight_index(l, r, c)] = weights[l][r][c];
            flat[spec2.bias_index(l, r)] = biases[l][r];
        }
    CHECK(flat == p2);
}

TEST_CASE("init determinism and fan-in scale") {
    auto spec = make_spec({4, 16, 3});
    auto a = nn::init_params(spec, 7);
    auto b = nn::init_params(spec, 7);
    CHECK(a == b);
    auto c = nn::init_params(spec, 8);
    CHECK(a != c);

    // per-layer sample std within 30% of 1/sqrt(fan_in); biases zero
    for (size_t l = 0; l < spec.num_layers(); ++l) {
        size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
        double sum2 = 0.0;
        for (size_t r = 0; r < out; ++r)
            for (size_t cc = 0; cc < in; ++cc) {
                double w = a[spec.weight_index(l, r, cc)];
                sum2 += w * w;
            }
        double sd = std::sqrt(sum2 / static_cast<double>(in * out));
        double target = 1.0 / std::sqrt(static_cast<double>(in));
        CHECK(sd == doctest::Approx(target).epsilon(0.3));
        for (size_t r = 0; r < out; ++r) CHECK(a[spec.bias_index(l, r)] == 0.0);
    }
}

TEST_CASE("forward zero mask gives zero logits") {
    auto spec = make_spec({2, 2});
    Vec params(spec.param_count(), 1.5);
    auto fr = nn::forward(spec, params, zeros(params.size()), {0.3, -0.7});
    CHECK(fr.logits == Vec{0.0, 0.0});
}

TEST_CASE("forward hand arithmetic on 1x1 linear") {
    nn::ModelSpec spec = make_spec({1, 2});
    // single layer 1->2; use row 0: w=2 b=1, x=3 -> 7
    Vec params = {2.0, 0.0, 1.0, 0.0};
    auto fr = nn::forward(spec, params, ones(4), {3.0});
    CHECK(fr.logits[0] == doctest::Approx(7.0));
    CHECK(fr.logits[1] == doctest::Approx(0.0));
    // no hidden layer: encoder is the identity
    CHECK(fr.hidden == Vec{3.0});
}

TEST_CASE("all-ones mask equals unmasked reference forward") {
    Rng rng(1234);
    auto spec = make_spec({3, 5, 4, 3}, nn::Activation::Relu);
    auto params = nn::init_params(spec, 9);
    Vec x = {0.4, -1.2, 0.9};
    auto fr = nn::forward(spec, params, ones(params.size()), x);

    // reference: explicit matrix walk without any masking path
    Vec a = x;
    for (size_t l = 0; l < spec.num_layers(); ++l) {
        size_t in = spec.layer_widths[l], out = spec.layer_widths[l + 1];
        Vec z(out, 0.0);
        for (size_t r = 0; r < out; ++r) {
            z[r] = params[spec.bias_index(l, r)];
            for (size_t c = 0; c < in; ++c)
                z[r] += params[spec.weight_index(l, r, c)] * a[c];
            if (l + 1 < spec.num_layers()) z[r] = std::max(0.0, z[r]);
        }
        a = z;
    }
    for (size_t c = 0; c < 3; ++c) CHECK(fr.logits[c] == doctest::Approx(a[c]).epsilon(1e-12));
}

TEST_CASE("uniform logits give ln C loss") {
    auto spec = make_spec({3, 4, 4});
    Vec params(spec.param_count(), 0.7);
    nn::Batch batch;
    batch.inputs = {{1.0, 2.0, 3.0}, {0.0, -1.0, 0.5}};
    batch.labels = {0, 2};
    auto res = nn::loss_and_grad(spec, params, zeros(params.size()), batch, nullptr, 0.0);
    CHECK(res.loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("alignment term vanishes when batch protos equal global protos") {
    Rng rng(5);
    auto spec = make_spec({3, 4, 3});
    auto params = nn::init_params(spec, 3);
    auto batch = random_batch(spec, 6, rng);
    auto base = nn::loss_and_grad(spec, params, ones(params.size()), batch, nullptr, 0.0);
    // use the batch's own prototypes as global: alignment contributes nothing
    auto res = nn::loss_and_grad(spec, params, ones(params.size()), batch,
                                 &base.batch_protos, 2.5);
    CHECK(res.alignment == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(res.loss == doctest::Approx(base.loss).epsilon(1e-12));
}

TEST_CASE("lambda > 0 without global protos is a configuration error") {
    auto spec = make_spec({2, 3, 2});
    Vec params(spec.param_count(), 0.1);
    nn::Batch batch;
    batch.inputs = {{1.0, 1.0}};
    batch.labels = {0};
    CHECK_THROWS_AS(nn::loss_and_grad(spec, params, ones(params.size()), batch,
                                      nullptr, 0.5),
                    std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(77);
    auto spec = make_spec({3, 4, 5, 3});   // tanh keeps FD smooth
    for (int trial = 0; trial < 3; ++trial) {
        auto params = nn::init_params(spec, 100 + trial);
        Vec mask(params.size(), 1.0);
        // knock out a third of positions
        for (double& b : mask)
            if (rng.uniform() < 0.33) b = 0.0;
        auto batch = random_batch(spec, 6, rng);
        auto gp = random_protos(spec.num_classes(), spec.encoder_dim(), rng);
        double lambda = trial == 0 ? 0.0 : 0.5;
        auto res = nn::loss_and_grad(spec, params, mask, batch,
                                     lambda > 0 ? &gp : nullptr, lambda);
        const double step = 1e-5;
        for (size_t i = 0; i < params.size(); ++i) {
            if (mask[i] == 0.0) {
                CHECK(res.grad[i] == 0.0);   // masked support is exact
                continue;
            }
            Vec p1 = params, p2 = params;
            p1[i] += step;
            p2[i] -= step;
            double fd = (loss_at(spec, p1, mask, batch, lambda > 0 ? &gp : nullptr, lambda) -
                         loss_at(spec, p2, mask, batch, lambda > 0 ? &gp : nullptr, lambda)) /
                        (2.0 * step);
            CHECK(std::fabs(res.grad[i] - fd) <= 1e-4 * (1.0 + std::fabs(fd)));
        }
    }
}

TEST_CASE("loss terms are non-negative") {
    Rng rng(13);
    auto spec = make_spec({4, 6, 3}, nn::Activation::Relu);
    for (int t = 0; t < 10; ++t) {
        auto params = nn::init_params(spec, 200 + t);
        auto batch = random_batch(spec, 5, rng);
        auto gp = random_protos(3, spec.encoder_dim(), rng);
        auto res = nn::loss_and_grad(spec, params, ones(params.size()), batch, &gp, 0.3);
        CHECK(res.cross_entropy >= 0.0);
        CHECK(res.alignment >= 0.0);
    }
}

TEST_CASE("dimension mismatches are rejected") {
    auto spec = make_spec({2, 3, 2});
    Vec params(spec.param_count(), 0.1);
    Vec x2 = {1.0, 2.0};
    Vec x1 = {1.0};
    CHECK_THROWS_AS(nn::forward(spec, params, ones(3), x2), std::invalid_argument);
    CHECK_THROWS_AS(nn::forward(spec, params, ones(params.size()), x1),
                    std::invalid_argument);
    Vec bad(params.size() + 1, 0.0);
    CHECK_THROWS_AS(nn::forward(spec, bad, ones(params.size()), x2),
                    std::invalid_argument);
}
