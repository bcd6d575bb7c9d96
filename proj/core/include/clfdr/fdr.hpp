#pragma once

// Decision procedures over per-test statistics: BH step-up on p-values,
// the cumulative-average step-up rule for lFDR/clFDR statistics, and the
// error bookkeeping used by the simulation harness. Missing statistics
// (NaN) mark skipped tests; they never enter the thresholds.

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace clfdr {

enum class Decision { reject, retain, skipped };

struct DecisionResult {
    std::vector<Decision> delta;
    std::size_t k = 0;      // number of rejections
    double lambda = 0.0;    // k-th smallest admitted statistic; 0 when k = 0
};

struct ErrorCounts {
    std::int64_t v = 0;        // false discoveries
    std::int64_t r = 0;        // discoveries
    std::int64_t s = 0;        // erroneously retained
    std::int64_t m = 0;        // admitted tests
    std::int64_t skipped = 0;  // tests excluded for lack of data
};

struct FdrMdr {
    double fdr_hat = 0.0;
    double mdr_hat = 0.0;
};

// Rejects the k tests with the smallest p-values, k = max{m : P_(m) <=
// alpha m / M}. Throws DataError on an empty or all-skipped input, an
// entry outside [0,1], or alpha outside (0,1].
DecisionResult bh_procedure(std::span<const double> p, double alpha);

// Rejects the k tests with the smallest statistics, k = max{m :
// sum_{i<=m} stat_(i) <= m alpha}, evaluated only at tie-group ends so
// tied boundary values are rejected all together or not at all.
DecisionResult lfdr_stepup(std::span<const double> stats, double alpha);

// V = rejected nulls, R = rejections, S = retained alternatives, over
// admitted tests; truth entries are 0 (null) or 1 (alternative).
ErrorCounts confusion_counts(const DecisionResult& result,
                             std::span<const int> truth);

// fdr_hat = mean over batches of V/R (0 when R = 0);
// mdr_hat = sum(S) / sum(M - R), the ratio-of-expectations form.
FdrMdr fdr_mdr_from_counts(std::span<const ErrorCounts> batches);
FdrMdr fdr_mdr_estimates(
    std::span<const std::pair<DecisionResult, std::vector<int>>> batches);

// CSV rows (test id, statistic, decision); ids fall back to the 1-based
// index when empty.
std::string decisions_to_csv(const DecisionResult& result,
                             std::span<const double> stats,
                             std::span<const std::string> ids = {});

// {k, lambda, alpha} as a JSON object.
std::string decision_summary_json(const DecisionResult& result, double alpha);

}  // namespace clfdr
