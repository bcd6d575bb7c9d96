#pragma once

// Two-group normal-approximation analytics: conditional clFDR(z, n) and
// marginal lFDR(z) surfaces, closed-form rejection boundaries a(n)/b(n),
// the monotone-threshold condition on n, and power calculations.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clfdr/count_data.hpp"

namespace clfdr {

struct SizePmfEntry {
    std::int64_t n = 0;
    double prob = 0.0;
};

using SizePmf = std::vector<SizePmfEntry>;

// Throws DataError unless probabilities sum to 1 within 1e-10 and the n
// values are distinct and >= 1.
void validate_size_pmf(const SizePmf& pmf);

// Synthetic row-total distribution: 59% of mass on n <= 10 with a right
// tail out to 911.
SizePmf default_size_pmf();

// Null proportion pi0, a single positive effect gamma1, and the row-total
// distribution. Z-scores are N(0,1) under the null and
// N(mu(n, gamma1), sigma2(gamma1)) under the alternative.
struct TwoGroupModel {
    double pi0 = 0.5;
    double gamma1 = 1.0;
    CovariateVector covariate;
    SizePmf size_pmf;

    void validate() const;
};

// Roots of clFDR(z, n) = lambda. When sigma2(gamma1) < 1 the region
// {clFDR <= lambda} is the interval [a, b]; when sigma2 > 1 it is the
// complement (-inf, a] U [b, inf). In the degenerate sigma2 = 1 case the
// region is one-sided [a, inf) and b is +inf.
struct RejectionBoundary {
    std::int64_t n = 0;
    double a = 0.0;
    double b = 0.0;
    bool exists = false;
};

// pi0 phi(z;0,1) / [pi0 phi(z;0,1) + pi1 phi(z; mu(n,gamma1), sigma2)].
double clfdr_zn(double z, std::int64_t n, const TwoGroupModel& model);

// Marginal statistic with the alternative mixed over size_pmf:
// pi0 phi(z;0,1) / [pi0 phi(z;0,1) + pi1 sum_n p(n) phi(z; mu(n), sigma2)].
double lfdr_z(double z, const TwoGroupModel& model);

// Solves z^2 (sigma2 - 1) + 2 z mu - 2 sigma2 log(sigma k) - mu^2 = 0 with
// k = pi0 (1 - lambda) / ((1 - pi0) lambda); a <= b. exists = false when
// the discriminant is negative (no z attains clFDR <= lambda). sigma2
// within 1e-12 of 1 takes the linear one-sided branch.
RejectionBoundary rejection_boundary(std::int64_t n, const TwoGroupModel& model,
                                     double lambda);

// Smallest n <= n_max with mu(n, gamma1)^2 > 2 log(sigma(gamma1) k); the
// satisfied set is an up-set in n, so a forward scan suffices. nullopt
// when unsatisfied up to n_max. Above this n, a(n) is increasing.
std::optional<std::int64_t> monotone_min_n(const TwoGroupModel& model,
                                           double lambda, std::int64_t n_max);

// 1 - Phi(threshold; mu(n, gamma1), sigma2(gamma1)).
double power_at_threshold(double threshold, std::int64_t n,
                          const TwoGroupModel& model);

// Sign of d/dz clFDR(z, n): sign(z (1 - sigma2) - mu(n, gamma1)), with
// values within 1e-12 of 0 (scaled) reported as 0. For sigma2 < 1 the
// surface is U-shaped with its minimum at mu / (1 - sigma2).
int clfdr_derivative_sign(double z, std::int64_t n,
                          const TwoGroupModel& model);

// Smallest z in [0, 50] where lfdr_z first drops to <= lambda: coarse
// grid scan for a bracket, then bisection to 1e-8. nullopt if the curve
// never crosses.
std::optional<double> lfdr_threshold(const TwoGroupModel& model,
                                     double lambda);

// Plot-ready tables.
// n, a, b, exists for each requested row total.
std::string boundary_table_csv(const TwoGroupModel& model, double lambda,
                               std::span<const std::int64_t> ns);
// Per-n power of the conditional rule at a(n) against the marginal rule
// at its fixed lambda-crossing threshold.
std::string power_table_csv(const TwoGroupModel& model, double lambda,
                            std::span<const std::int64_t> ns);
// Smallest monotone n over a (gamma1, lambda) grid.
std::string monotone_frontier_csv(const TwoGroupModel& base,
                               std::span<const double> gammas,
                               std::span<const double> lambdas,
                               std::int64_t n_max);

}  // namespace clfdr
