#pragma once

// Seeded randomness with counter-based substream derivation.
//
// A substream is identified by (master seed, stream words...). Deriving the
// same substream twice yields the same sequence, so per-(rep, test) streams
// make parallel simulation reproducible regardless of execution order.

#include <cstdint>
#include <span>
#include <vector>

namespace clfdr {

// splitmix64 step; also used to mix stream identifiers into a seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64. Satisfies UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) { reseed(seed); }

    // Derive the substream identified by (seed, a, b, c).
    static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                         std::uint64_t c = 0);

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~0ULL; }

    result_type operator()() {
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

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller (no cached spare; two uniforms per draw).
    double normal();

    // Index k with probability probs[k] / sum(probs).
    std::size_t categorical(std::span<const double> probs);

    // Binomial(n, p), exact.
    std::int64_t binomial(std::int64_t n, double p);

    // Multinomial(n, probs) by sequential conditional binomials: cell i is
    // Binomial(remaining, p_i / tail_i), so each draw costs O(N) binomials.
    std::vector<std::int64_t> multinomial(std::int64_t n,
                                          std::span<const double> probs);
    void multinomial(std::int64_t n, std::span<const double> probs,
                     std::vector<std::int64_t>& out);

private:
    void reseed(std::uint64_t seed);
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
};

}  // namespace clfdr
