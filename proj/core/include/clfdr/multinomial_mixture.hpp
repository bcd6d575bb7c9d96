#pragma once

// K+1 component multinomial mixture over per-test count rows, its EM
// estimator, model-selection scores, and the conditional local false
// discovery rate statistics clFDR_m (the null-component responsibilities).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clfdr/count_data.hpp"

namespace clfdr {

// Component 0 is the null: gammas[0] = 0 exactly. Non-null components are
// kept sorted ascending by gamma (canonical labeling).
struct MixtureParams {
    std::vector<double> gammas;
    std::vector<double> pis;

    std::size_t components() const { return gammas.size(); }

    // Throws DataError unless: gammas[0] = 0, all gammas distinct, every
    // pi in (0,1) summing to 1 within 1e-10, non-null gammas ascending.
    void validate() const;
};

// z_hat[k][m] = posterior probability that test m came from component k.
// Columns for rows with n_total = 0 are NaN.
struct Responsibilities {
    std::vector<std::vector<double>> z_hat;

    std::size_t components() const { return z_hat.size(); }
    std::size_t tests() const { return z_hat.empty() ? 0 : z_hat[0].size(); }
};

struct FitResult {
    MixtureParams params;
    std::vector<double> loglik_trace;
    std::size_t iterations = 0;
    bool converged = false;
    double aic = 0.0;
    double bic = 0.0;
    bool empty_component = false;
    std::size_t restart_index = 0;

    double loglik() const { return loglik_trace.back(); }
};

struct EmOptions {
    double tol = 1e-8;
    std::size_t max_iter = 1000;
    std::size_t restarts = 5;  // run 0 uses quantile init, the rest random
    std::uint64_t seed = 0;
    std::optional<MixtureParams> init;  // explicit init runs once
};

// log sum_k pi_k p(y | n; gamma_k) by log-sum-exp over component log-pmfs.
// Throws DataError for n_total = 0.
double mixture_log_pmf(const TestRecord& rec, const MixtureParams& params,
                       const CovariateVector& x);

// Sum of mixture_log_pmf over rows with n_total >= 1, pairwise-summed so
// the reduction order is fixed. Throws DataError if no usable rows.
double log_likelihood(const CountDataset& ds, const MixtureParams& params);

// z_hat[k][m] = pi_k p(y_m|gamma_k) / sum_j pi_j p(y_m|gamma_j), computed
// in log space then normalized.
Responsibilities e_step(const CountDataset& ds, const MixtureParams& params);

// Row means of the responsibility matrix over usable columns, unfloored.
std::vector<double> m_step_pi(const Responsibilities& resp);

// For each k >= 1 independently maximizes
//   g_k(g) = A_k g - B_k log(sum_n exp(g x_n)),
//   A_k = sum_m z_hat[k][m] t_m, B_k = sum_m z_hat[k][m] n_m,
// by safeguarded Newton on the stationarity condition x_bar(g) = A_k/B_k
// inside the bracket [-20, 20] with bisection fallback. gammas[0] stays 0.
// A component with B_k < 1e-12 keeps current[k] and is flagged in *empty.
std::vector<double> m_step_gamma(const CountDataset& ds,
                                 const Responsibilities& resp,
                                 const CovariateVector& x,
                                 const std::vector<double>& current,
                                 std::vector<bool>* empty = nullptr);

// Full EM fit with k_alt non-null components. Alternates E and M steps
// until the log-likelihood increase drops below tol or max_iter is hit.
// Keeps the best final log-likelihood across restarts. AIC = -2l + 2q,
// BIC = -2l + q log(M) with q = 2 k_alt. Throws DataError on no usable
// rows or a degenerate explicit init.
FitResult fit_em(const CountDataset& ds, std::size_t k_alt,
                 const EmOptions& opts = {});

// clFDR_m = pi_0 p(y_m|gamma_0) / sum_k pi_k p(y_m|gamma_k), identical to
// row 0 of e_step. NaN for rows with n_total = 0.
std::vector<double> clfdr_stats(const CountDataset& ds,
                                const MixtureParams& params);

// Per-test conditional MLE: the gamma solving x_bar(gamma) = t/n, clamped
// to [-20, 20]. Used for quantile initialization.
double row_mle(const TestRecord& rec, const CovariateVector& x);

// {gammas, pis, loglik, aic, bic, iterations, converged} as a JSON object.
std::string fit_result_to_json(const FitResult& fit);

}  // namespace clfdr
