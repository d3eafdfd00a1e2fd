#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace comve {

/// Deterministic splitmix64 generator. A given seed always produces the same
/// stream on every platform; nothing in the library draws from a global RNG.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (explicit formula, no std::distribution,
    /// so streams are identical across standard libraries).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 6.283185307179586476925286766559 * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    /// Normal with mean zero, rejection-sampled into [-2*sigma, 2*sigma].
    double truncated_normal(double sigma) {
        for (;;) {
            double x = normal() * sigma;
            if (x >= -2.0 * sigma && x <= 2.0 * sigma) return x;
        }
    }

    /// Uniform integer in [0, n). n must be > 0.
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

    /// Derive an independent deterministic stream tagged by `tag`.
    Rng fork(uint64_t tag) const {
        Rng probe(state_ ^ (0xD1B54A32D192ED03ull * (tag + 1)));
        return Rng(probe.next_u64());
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Mix several seed components into one stream tag.
inline uint64_t mix_seed(uint64_t a, uint64_t b, uint64_t c = 0) {
    Rng r(a);
    uint64_t x = r.next_u64() ^ (b * 0xA0761D6478BD642Full);
    Rng r2(x);
    return r2.next_u64() ^ (c * 0xE7037ED1A0B428DBull);
}

} // namespace comve
