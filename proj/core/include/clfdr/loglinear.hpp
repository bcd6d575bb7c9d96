#pragma once

// Per-test multinomial log-linear model: cell probabilities p_n(beta)
// proportional to exp(beta * x_n), the sufficient statistic t = x'y, its
// Z-score under beta = 0, two-sided p-values, and the conditional moments
// of the Z-score under an effect gamma.

#include <cstdint>
#include <vector>

#include "clfdr/count_data.hpp"
#include "clfdr/rng.hpp"

namespace clfdr {

struct TestStatistics {
    double t = 0.0;
    double z = 0.0;
    double p = 1.0;
    std::int64_t n_total = 0;
};

// Null reference distribution for Z-scores: the standard normal
// approximation or an empirical sample of simulated null Z-scores.
struct NullDistribution {
    enum class Kind { standard_normal, monte_carlo_empirical };

    Kind kind = Kind::standard_normal;
    std::vector<double> samples;  // sorted; empirical kind only
    std::uint64_t seed = 0;       // empirical kind only

    static NullDistribution standard_normal() { return {}; }
};

// p(beta): softmax of beta * x, max-subtracted. Components sum to 1
// within 1e-12.
std::vector<double> multinomial_probs(double beta, const CovariateVector& x);

// log of the normalizer sum_n exp(beta * x_n), max-subtracted.
double log_normalizer(double beta, const CovariateVector& x);

// Mean of x under p(beta).
double covariate_mean(double beta, const CovariateVector& x);

// Variance of x under p(beta), i.e. x' Sigma(beta) x.
double covariate_variance(double beta, const CovariateVector& x);

// log p(y | n; beta); multinomial coefficient via lgamma. Throws DataError
// for n_total = 0 (skipped row) or mismatched dimensions.
double log_pmf(const TestRecord& rec, double beta, const CovariateVector& x);

// Sufficient statistic and Z-score under beta = 0:
//   t = x'y, z = (t - n x'p(0)) / sqrt(n x'Sigma(0)x).
// Throws DataError for n_total = 0.
TestStatistics z_score(const TestRecord& rec, const CovariateVector& x);

// Two-sided p-value 2[1 - F0(|z|)]. The empirical kind uses the add-one
// estimator (1 + #{samples >= |z|}) / (1 + #samples) for the tail, so the
// result is always positive. Capped at 1.
double p_value(double z, const NullDistribution& f0);

// Simulate `reps` null Z-scores at row total n; sorted ascending.
// Deterministic for a fixed seed.
NullDistribution simulate_null(const CovariateVector& x, std::int64_t n,
                               std::size_t reps, std::uint64_t seed);

// mu(n, gamma) = sqrt(n) x'[p(gamma) - p(0)] / sqrt(x'Sigma(0)x):
// conditional mean of the Z-score given row total n and effect gamma.
double conditional_mean(std::int64_t n, double gamma, const CovariateVector& x);

// sigma(gamma) = sqrt(x'Sigma(gamma)x / x'Sigma(0)x): conditional standard
// deviation of the Z-score (free of n).
double conditional_sd(double gamma, const CovariateVector& x);

}  // namespace clfdr
