#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace framp {

// Deterministic RNG with hand-rolled samplers so that identical seeds give
// identical streams regardless of standard-library distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ULL)) {}

    static uint64_t mix(uint64_t a, uint64_t b) {
        return splitmix(splitmix(a) ^ (0xbf58476d1ce4e5b9ULL * (b + 1)));
    }
    static uint64_t mix(uint64_t a, uint64_t b, uint64_t c) {
        return mix(mix(a, b), c);
    }

    uint64_t next_u64() {
        // xorshift64* step
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545f4914f6cdd1dULL;
    }

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * (1.0 / 9007199254740992.0);
    }

    // uniform integer in [0, n)
    uint64_t uniform_int(uint64_t n) {
        // rejection sampling to avoid modulo bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x;
        do { x = next_u64(); } while (x >= limit);
        return x % n;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Marsaglia-Tsang; alpha < 1 handled by the boost Gamma(a) = Gamma(a+1) U^{1/a}
    double gamma(double alpha) {
        if (alpha < 1.0) {
            double u;
            do { u = uniform(); } while (u <= 0.0);
            return gamma(alpha + 1.0) * std::pow(u, 1.0 / alpha);
        }
        double d = alpha - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x, v;
            do {
                x = normal();
                v = 1.0 + c * x;
            } while (v <= 0.0);
            v = v * v * v;
            double u = uniform();
            if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
            if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
        }
    }

    std::vector<double> dirichlet(double alpha, size_t n) {
        std::vector<double> p(n);
        double sum = 0.0;
        for (auto& x : p) { x = gamma(alpha); sum += x; }
        if (sum <= 0.0) sum = 1.0;
        for (auto& x : p) x /= sum;
        return p;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Fixed role offsets for deriving every sub-stream from the single top-level seed.
namespace seed_role {
constexpr uint64_t data = 1;
constexpr uint64_t partition = 2;
constexpr uint64_t extractor = 3;
constexpr uint64_t model_init = 4;
constexpr uint64_t hn_init = 5;
constexpr uint64_t capacities = 6;
constexpr uint64_t participation = 7;
constexpr uint64_t client_batches = 8;
constexpr uint64_t proto_noise = 9;
}  // namespace seed_role

}  // namespace framp
