#pragma once

// Marginal baseline: K-component normal mixture for Z-scores with
// component 0 frozen at the standard normal, fit by EM, and the local
// false discovery rate statistics lFDR(z) = pi0 phi(z) / f(z).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace clfdr {

struct NormalComponent {
    double pi = 0.0;
    double mu = 0.0;
    double sigma2 = 1.0;
};

// pi0 belongs to the frozen N(0,1) component; `components` holds the K-1
// free components.
struct NormalMixtureParams {
    double pi0 = 1.0;
    std::vector<NormalComponent> components;

    std::size_t total_components() const { return components.size() + 1; }

    // Throws DataError unless proportions sum to 1 within 1e-10, each lies
    // in (0,1), and every variance is at or above the 1e-4 floor.
    void validate() const;
};

struct NormalFitResult {
    NormalMixtureParams params;
    std::vector<double> loglik_trace;
    std::size_t iterations = 0;
    bool converged = false;
    double aic = 0.0;
    double bic = 0.0;
    std::size_t q = 0;  // parameter count used for AIC/BIC: 4(K-1)
    bool variance_collapsed = false;  // floor hit again after the one re-seed
    std::size_t restart_index = 0;

    double loglik() const { return loglik_trace.back(); }
};

// f(z) = pi0 phi(z;0,1) + sum_k pi_k phi(z;mu_k,sigma2_k).
double normal_mixture_density(double z, const NormalMixtureParams& params);

// EM with component 0 frozen at (0,1). Initial means are quantile-spread
// over the sample (restart 0) or resampled z values (later restarts), unit
// variances, uniform proportions; best final log-likelihood wins. A
// component whose variance falls below the 1e-4 floor is re-seeded once,
// then floored and flagged. Requires k_total >= 2 and z.size() >= k_total.
NormalFitResult fit_normal_mixture(std::span<const double> z,
                                   std::size_t k_total, double tol = 1e-8,
                                   std::size_t max_iter = 1000,
                                   std::uint64_t seed = 0,
                                   std::size_t restarts = 5);

// Element-wise pi0 phi(z;0,1) / f(z), capped at 1.
std::vector<double> lfdr_stats(std::span<const double> z,
                               const NormalMixtureParams& params);

// {pi0, components: [{pi, mu, sigma2}], aic, bic} as a JSON object.
std::string normal_fit_to_json(const NormalFitResult& fit);

}  // namespace clfdr
