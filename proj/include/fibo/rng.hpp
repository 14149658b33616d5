#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fibo {

// Deterministic PRNG (xoshiro256** seeded via splitmix64) with explicit
// distribution code so that streams are reproducible bit-for-bit across
// platforms and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : s_) s = splitmix64(x);
    }

    // Independent child stream; derive(a) != derive(b) for a != b.
    Rng derive(std::uint64_t stream) const {
        std::uint64_t x = seed_ ^ (0x9e3779b97f4a7c15ULL + stream * 0xbf58476d1ce4e5b9ULL);
        return Rng(splitmix64(x));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [lo, hi] inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t n = static_cast<std::uint64_t>(hi - lo) + 1;
        const auto wide = static_cast<unsigned __int128>(next_u64()) * n;
        return lo + static_cast<std::int64_t>(wide >> 64);
    }

    // Standard normal via Box-Muller (one deviate per pair of uniforms).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::vector<double> normal_vec(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = normal();
        return out;
    }

    // Fisher-Yates permutation of {0, ..., n-1}.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

    std::uint64_t seed() const { return seed_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t s_[4];
};

}  // namespace fibo
