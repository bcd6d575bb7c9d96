#include "clfdr/math_util.hpp"

#include <algorithm>
#include <limits>

namespace clfdr {

double log_sum_exp(std::span<const double> v) {
    if (v.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(v.begin(), v.end());
    if (std::isinf(m) && m < 0) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

namespace {

double pairwise_sum_range(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum_range(v, h) + pairwise_sum_range(v + h, n - h);
}

}  // namespace

double pairwise_sum(std::span<const double> v) {
    return pairwise_sum_range(v.data(), v.size());
}

}  // namespace clfdr
