#pragma once

// Shared numeric kernels: stabilized log-sum-exp, pairwise summation,
// normal density/CDF helpers.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace clfdr {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// log(exp(a) + exp(b)) without overflow.
inline double log_add_exp(double a, double b) {
    if (std::isinf(a) && a < 0) return b;
    if (std::isinf(b) && b < 0) return a;
    const double m = a > b ? a : b;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// log(sum_i exp(v_i)), max-subtracted. Empty input yields -inf.
double log_sum_exp(std::span<const double> v);

// Pairwise (cascade) summation: deterministic and more accurate than a
// running left-to-right sum for long vectors.
double pairwise_sum(std::span<const double> v);

// Standard normal density and its log.
inline double norm_pdf(double z) {
    return std::exp(-0.5 * z * z - kLogSqrt2Pi);
}
inline double norm_log_pdf(double z) {
    return -0.5 * z * z - kLogSqrt2Pi;
}

// phi(z; mean, var): normal density with the given mean and variance.
inline double norm_pdf(double z, double mean, double var) {
    const double sd = std::sqrt(var);
    const double u = (z - mean) / sd;
    return std::exp(-0.5 * u * u - kLogSqrt2Pi) / sd;
}
inline double norm_log_pdf(double z, double mean, double var) {
    const double u = (z - mean) * (z - mean) / var;
    return -0.5 * (u + std::log(var)) - kLogSqrt2Pi;
}

// Standard normal CDF via erfc; absolute error well below 1e-12 (the
// tolerance asserted by the golden tests).
inline double norm_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

// Phi(z; mean, var).
inline double norm_cdf(double z, double mean, double var) {
    return norm_cdf((z - mean) / std::sqrt(var));
}

// Two-sided standard normal tail: 2 * (1 - Phi(|z|)), computed as an erfc
// so that values stay accurate far into the tail.
inline double norm_two_sided_p(double z) {
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

}  // namespace clfdr
