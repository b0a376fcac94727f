#pragma once

// Portable pseudo-random generation.
//
// Every random draw in the library goes through Rng so that a (config, seed)
// pair reproduces bit-identical results on any platform and in any language
// that implements the same three primitives:
//
//   seeding   : state[i] = splitmix64(x) applied four times starting from x = seed
//   next()    : xoshiro256** (Blackman & Vigna, 2018)
//   uniform() : (next() >> 11) * 2^-53, a double in [0, 1)
//
// Derived draws are defined on top of uniform():
//   normal()       : Box-Muller, cos branch only, u1 = 1 - uniform() so log(u1) is finite
//   categorical(c) : smallest i with u < c[i], c being the cumulative sum of
//                    probabilities; u >= c.back() yields the last index with
//                    positive mass

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace rgtd {

class Rng {
public:
    explicit Rng(std::uint64_t seed) noexcept {
        std::uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    std::uint64_t next() noexcept {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    double normal() noexcept {
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) noexcept {
        return static_cast<std::size_t>(uniform() * static_cast<double>(n));
    }

    std::size_t categorical(std::span<const double> cumulative) noexcept {
        const double u = uniform();
        for (std::size_t i = 0; i < cumulative.size(); ++i) {
            if (u < cumulative[i]) return i;
        }
        // Round-off left the total just under one: fall back to the last
        // index that actually carries mass.
        for (std::size_t i = cumulative.size(); i-- > 0;) {
            const double prev = i == 0 ? 0.0 : cumulative[i - 1];
            if (cumulative[i] > prev) return i;
        }
        return 0;
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) noexcept {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4]{};
};

}  // namespace rgtd
