#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace conc {

// Deterministic random machinery. The standard <random> distributions are
// implementation-defined, which would break byte-identical reruns if the
// toolchain changes; these generators are pinned algorithms, so a given
// (seed, stream) always produces the same draws regardless of threading
// or platform.

constexpr uint64_t splitmix64(uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive an independent stream seed from a base seed and up to three
/// coordinates (stock index, day index, stream tag, ...).
constexpr uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b = 0,
                               uint64_t c = 0) noexcept {
    uint64_t s = splitmix64(base ^ 0x6a09e667f3bcc909ULL);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

/// xoshiro256** — small, fast, and fully specified.
class Rng {
public:
    explicit Rng(uint64_t seed) noexcept {
        uint64_t x = seed;
        for (auto& w : state_) {
            x = splitmix64(x);
            w = x;
        }
    }

    uint64_t next_u64() noexcept {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    double next_double() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform in (0, 1]; safe as a log() argument.
    double next_double_open() noexcept { return 1.0 - next_double(); }

    /// Uniform integer in [lo, hi] inclusive.
    int64_t next_int(int64_t lo, int64_t hi) noexcept {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // Lemire's multiply-shift rejection method.
        uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * span;
        auto l = static_cast<uint64_t>(m);
        if (l < span) {
            const uint64_t t = (0 - span) % span;
            while (l < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * span;
                l = static_cast<uint64_t>(m);
            }
        }
        return lo + static_cast<int64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller (no state carried between calls).
    double next_normal() noexcept {
        const double u1 = next_double_open();
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    double next_lognormal(double mu, double sigma) noexcept {
        return std::exp(mu + sigma * next_normal());
    }

    bool next_bernoulli(double p) noexcept { return next_double() < p; }

    /// Fisher-Yates shuffle of an index-addressable container.
    template <typename Container>
    void shuffle(Container& v) noexcept {
        for (size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<size_t>(next_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr uint64_t rotl(uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }
    uint64_t state_[4];
};

}  // namespace conc
