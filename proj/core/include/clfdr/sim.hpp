#pragma once

// Monte Carlo harness: draws datasets from the multinomial mixture with
// i.i.d. row totals, runs the decision procedures, and estimates FDR and
// MDR per procedure with rejections-by-n histograms.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "clfdr/count_data.hpp"
#include "clfdr/multinomial_mixture.hpp"
#include "clfdr/threshold.hpp"

namespace clfdr {

// Procedure names: "bh", "lfdr-normal", "clfdr-oracle", "clfdr-adaptive".
struct SimConfig {
    std::size_t m = 500;
    MixtureParams params;
    CovariateVector covariate;
    SizePmf size_pmf;
    double alpha = 0.05;
    std::size_t reps = 1000;
    std::uint64_t seed = 0;
    std::vector<std::string> procedures = {"bh", "lfdr-normal",
                                           "clfdr-oracle", "clfdr-adaptive"};

    // fitting knobs for the adaptive arms
    double tol = 1e-8;
    std::size_t max_iter = 1000;
    std::size_t em_restarts = 3;
    std::size_t normal_components = 2;
    std::size_t normal_restarts = 3;

    void validate() const;
};

// Parses the JSON object form of SimConfig; unknown procedure names and
// malformed fields raise DataError. Missing optional fields take the
// defaults above; an absent size_pmf takes default_size_pmf().
SimConfig sim_config_from_json(const std::string& text);

struct HistogramRow {
    std::int64_t n = 0;
    std::int64_t tests = 0;
    std::int64_t alternatives = 0;
    std::int64_t rejections = 0;
    std::int64_t true_rejections = 0;
};

struct ArmReport {
    std::string procedure;
    double fdr_hat = 0.0;
    double mdr_hat = 0.0;
    double mean_r = 0.0;
    double mc_error = 0.0;  // binomial SE of fdr_hat over included reps
    std::size_t nonconverged_reps = 0;  // excluded from the averages
    std::vector<HistogramRow> by_n;    // sorted by n, summed over reps
};

struct SimReport {
    double alpha = 0.0;
    std::size_t m = 0;
    std::size_t reps = 0;
    std::uint64_t seed = 0;
    double mc_error = 0.0;  // largest arm-level mc_error
    std::vector<ArmReport> arms;
};

// Ancestral sampling: per test, component ~ pis, row total ~ size_pmf,
// counts ~ multinomial(n, p(gamma_k)); truth = 1 iff component != 0.
// Deterministic given (config.seed, rep_index), independent per test.
std::pair<CountDataset, std::vector<int>> sample_dataset(
    const SimConfig& config, std::size_t rep_index);

// Runs every configured procedure over `reps` datasets and aggregates in
// rep order. Reps whose fit did not converge are excluded from that arm's
// averages and counted.
SimReport run_simulation(const SimConfig& config);

std::string sim_report_to_json(const SimReport& report);

// procedure,n,tests,alternatives,rejections,true_rejections rows.
std::string sim_histograms_csv(const SimReport& report);

}  // namespace clfdr
