#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace aealt {

// Derives an independent stream seed from (base, stream) via splitmix64
// mixing. Used everywhere a component needs its own reproducible stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Deterministic random layer. std::uniform_real_distribution and friends are
// implementation-defined, so every transformation from raw mt19937_64 output
// to a sample is hand-rolled here and therefore identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller; the pair's second sample is cached.
    double normal();
    // Uniform integer in [0, n), unbiased via rejection.
    std::size_t index(std::size_t n);
    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Inverse standard-normal CDF (Acklam's rational approximation plus one
// Halley refinement step; |error| < 1e-15 over (0, 1)).
double inverse_normal_cdf(double p);

}  // namespace aealt
