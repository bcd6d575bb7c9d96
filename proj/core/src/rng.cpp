#include "clfdr/rng.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "clfdr/math_util.hpp"

namespace clfdr {

void Rng::reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                   std::uint64_t c) {
    // Fold the stream identifier into the seed one word at a time; each word
    // passes through the full splitmix64 avalanche so nearby ids decorrelate.
    std::uint64_t sm = seed;
    std::uint64_t h = splitmix64(sm);
    sm = h ^ a;
    h = splitmix64(sm);
    sm = h ^ b;
    h = splitmix64(sm);
    sm = h ^ c;
    return Rng(splitmix64(sm));
}

double Rng::normal() {
    double u1 = uniform01();
    const double u2 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

std::size_t Rng::categorical(std::span<const double> probs) {
    if (probs.empty()) throw std::invalid_argument("categorical: empty weights");
    double total = 0.0;
    for (double p : probs) total += p;
    double u = uniform01() * total;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        u -= probs[k];
        if (u < 0.0) return k;
    }
    return probs.size() - 1;
}

std::int64_t Rng::binomial(std::int64_t n, double p) {
    if (n <= 0) return 0;
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    std::binomial_distribution<std::int64_t> dist(n, p);
    return dist(*this);
}

std::vector<std::int64_t> Rng::multinomial(std::int64_t n,
                                           std::span<const double> probs) {
    std::vector<std::int64_t> counts;
    multinomial(n, probs, counts);
    return counts;
}

void Rng::multinomial(std::int64_t n, std::span<const double> probs,
                      std::vector<std::int64_t>& out) {
    out.assign(probs.size(), 0);
    double tail = 0.0;
    for (double p : probs) tail += p;
    std::int64_t remaining = n;
    for (std::size_t i = 0; i + 1 < probs.size() && remaining > 0; ++i) {
        const double cond = probs[i] / tail;
        const std::int64_t c = binomial(remaining, cond < 1.0 ? cond : 1.0);
        out[i] = c;
        remaining -= c;
        tail -= probs[i];
    }
    if (!out.empty()) out[probs.size() - 1] = remaining;
}

}  // namespace clfdr
